#pragma once

#include <array>
#include <span>
#include <vector>

#include "qrw/encoder.hpp"
#include "qrw/labeler.hpp"

namespace qrw {

// One probability row per question slot (BOS included), columns ordered as
// Tag: B_insert, B_replace, I, O.
using TagDistribution = std::vector<std::array<double, kNumTags>>;

// softmax(W_d h_k + b_d) for every row of `question_vecs`.
TagDistribution tag_probs(const ModelParams& params, const Matrix& question_vecs);

// Per-slot argmax. Ties prefer O, then B_replace, then B_insert, then I.
std::vector<Tag> greedy_decode(const TagDistribution& dist);

// Candidate spans from a tag sequence, positions indexed into `tags`.
// B_replace + following I's form a replace span; each B_insert is a single
// insert host. Orphan I's, and I's after a B_insert, are ignored.
std::vector<QuestionSpan> extract_spans(std::span<const Tag> tags);

// Sum over slots of -log max(p[gold], eps); accumulates the gradient with
// respect to the detect head into `grad` and returns d loss / d question_vecs
// (both scaled by `scale`).
double detect_loss_backward(const ModelParams& params, const Matrix& question_vecs,
                            std::span<const Tag> gold, double scale, ModelParams& grad,
                            Matrix& dquestion);

}  // namespace qrw
