#pragma once

#include <cstddef>
#include <vector>

#include "qrw/encoder.hpp"
#include "qrw/labeler.hpp"

namespace qrw {

struct SpanDistribution {
  std::vector<double> start;  // length m
  std::vector<double> end;    // length m
  std::size_t query_index = 0;
};

// Additive attention over the m context vectors, keyed by the query's start
// token: score(t) = v . tanh(W [h_t ; q] + b), then softmax over t. Computed
// separately for the start and end heads. Throws EmptyContext when m = 0.
SpanDistribution span_probs(const ModelParams& params, const Matrix& context_vecs,
                            const RowVector& query_vec, std::size_t query_index = 0);

// argmax of start[s] * end[e] with s <= e and e - s + 1 <= max_len. Ties go
// to the smaller s, then the smaller e.
ContextSpan select_span(const SpanDistribution& dist, std::size_t max_len = 30);

// -log p_start[gold.start] - log p_end[gold.end] for one query. Head
// gradients go into `grad`; input gradients are added to `dcontext` and
// `dquery`. Everything is multiplied by `scale`.
double span_loss_backward(const ModelParams& params, const Matrix& context_vecs,
                          const RowVector& query_vec, const ContextSpan& gold, double scale,
                          ModelParams& grad, Matrix& dcontext, RowVector& dquery);

}  // namespace qrw
