#include "qrw/comprehend.hpp"

#include <cmath>

#include "qrw/error.hpp"

namespace qrw {

namespace {

constexpr double kProbFloor = 1e-12;

struct HeadPass {
  Matrix activation;  // m x h, tanh(W [h_t ; q] + b)
  std::vector<double> probs;
};

HeadPass run_head(const Matrix& w, const Matrix& b, const Matrix& v, const Matrix& context,
                  const RowVector& query) {
  const Eigen::Index d = context.cols();
  // W [h_t ; q] = W_ctx h_t + W_qry q; the query half is shared by every t.
  RowVector shared = query * w.rightCols(d).transpose() + b.row(0);
  HeadPass pass;
  pass.activation = context * w.leftCols(d).transpose();
  pass.activation.rowwise() += shared;
  pass.activation = pass.activation.array().tanh();
  Eigen::VectorXd scores = pass.activation * v.row(0).transpose();
  double mx = scores.maxCoeff();
  double sum = 0;
  pass.probs.resize(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index t = 0; t < scores.size(); ++t) {
    pass.probs[static_cast<std::size_t>(t)] = std::exp(scores(t) - mx);
    sum += pass.probs[static_cast<std::size_t>(t)];
  }
  for (auto& p : pass.probs) p /= sum;
  return pass;
}

double head_backward(const Matrix& w, const Matrix& v, const Matrix& context,
                     const RowVector& query, const HeadPass& pass, std::size_t gold, double scale,
                     Matrix& gw, Matrix& gb, Matrix& gv, Matrix& dcontext, RowVector& dquery) {
  double p = pass.probs[gold];
  if (p < kProbFloor) return -std::log(kProbFloor);
  const Eigen::Index m = context.rows();
  const Eigen::Index d = context.cols();
  Eigen::VectorXd dscore(m);
  for (Eigen::Index t = 0; t < m; ++t)
    dscore(t) = scale * (pass.probs[static_cast<std::size_t>(t)] - (static_cast<std::size_t>(t) == gold ? 1.0 : 0.0));

  gv.row(0) += dscore.transpose() * pass.activation;
  // dz_t = dscore_t * v (.) (1 - a_t^2)
  Matrix dz = (1.0 - pass.activation.array().square()).matrix();
  dz = dz.array().rowwise() * v.row(0).array();
  dz = dscore.asDiagonal() * dz;
  gw.leftCols(d) += dz.transpose() * context;
  RowVector dz_sum = dz.colwise().sum();
  gw.rightCols(d) += dz_sum.transpose() * query;
  gb.row(0) += dz_sum;
  dcontext += dz * w.leftCols(d);
  dquery += dz_sum * w.rightCols(d);
  return -std::log(p);
}

}  // namespace

SpanDistribution span_probs(const ModelParams& params, const Matrix& context_vecs,
                            const RowVector& query_vec, std::size_t query_index) {
  if (context_vecs.rows() == 0) throw EmptyContext();
  if (context_vecs.cols() != params.config.d || query_vec.size() != params.config.d)
    throw ShapeError("span_probs inputs have the wrong width");
  SpanDistribution out;
  out.query_index = query_index;
  out.start = run_head(params.start_w, params.start_b, params.start_v, context_vecs, query_vec).probs;
  out.end = run_head(params.end_w, params.end_b, params.end_v, context_vecs, query_vec).probs;
  return out;
}

ContextSpan select_span(const SpanDistribution& dist, std::size_t max_len) {
  const std::size_t m = dist.start.size();
  if (m == 0 || dist.end.size() != m) throw ShapeError("span distribution is empty or ragged");
  if (max_len == 0) throw Error("max answer length must be at least 1");
  ContextSpan best{0, 0};
  double best_score = -1.0;
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t e = s; e < m && e - s + 1 <= max_len; ++e) {
      double score = dist.start[s] * dist.end[e];
      if (score > best_score) {
        best_score = score;
        best = {s, e};
      }
    }
  }
  return best;
}

double span_loss_backward(const ModelParams& params, const Matrix& context_vecs,
                          const RowVector& query_vec, const ContextSpan& gold, double scale,
                          ModelParams& grad, Matrix& dcontext, RowVector& dquery) {
  if (context_vecs.rows() == 0) throw EmptyContext();
  if (gold.end >= static_cast<std::size_t>(context_vecs.rows()) || gold.start > gold.end)
    throw LabelError("gold answer span outside the context");
  auto start = run_head(params.start_w, params.start_b, params.start_v, context_vecs, query_vec);
  auto end = run_head(params.end_w, params.end_b, params.end_v, context_vecs, query_vec);
  double loss = head_backward(params.start_w, params.start_v, context_vecs, query_vec, start,
                              gold.start, scale, grad.start_w, grad.start_b, grad.start_v,
                              dcontext, dquery);
  loss += head_backward(params.end_w, params.end_v, context_vecs, query_vec, end, gold.end, scale,
                        grad.end_w, grad.end_b, grad.end_v, dcontext, dquery);
  return loss;
}

}  // namespace qrw
