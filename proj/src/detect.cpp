#include "qrw/detect.hpp"

#include <cmath>

#include "qrw/error.hpp"

namespace qrw {

namespace {

constexpr double kProbFloor = 1e-12;

std::array<double, kNumTags> softmax4(const RowVector& logits) {
  std::array<double, kNumTags> p{};
  double mx = logits.maxCoeff();
  double sum = 0;
  for (std::size_t i = 0; i < kNumTags; ++i) {
    p[i] = std::exp(logits(static_cast<Eigen::Index>(i)) - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

TagDistribution tag_probs(const ModelParams& params, const Matrix& question_vecs) {
  if (question_vecs.cols() != params.detect_w.cols())
    throw ShapeError("question vectors have the wrong width");
  Matrix logits = question_vecs * params.detect_w.transpose();
  logits.rowwise() += params.detect_b.row(0);
  TagDistribution out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.push_back(softmax4(logits.row(r)));
  return out;
}

std::vector<Tag> greedy_decode(const TagDistribution& dist) {
  static constexpr Tag kPreference[] = {Tag::kO, Tag::kBReplace, Tag::kBInsert, Tag::kI};
  std::vector<Tag> out;
  out.reserve(dist.size());
  for (const auto& row : dist) {
    Tag best = kPreference[0];
    for (Tag t : kPreference) {
      if (row[static_cast<std::size_t>(t)] > row[static_cast<std::size_t>(best)]) best = t;
    }
    out.push_back(best);
  }
  return out;
}

std::vector<QuestionSpan> extract_spans(std::span<const Tag> tags) {
  std::vector<QuestionSpan> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == Tag::kBInsert) {
      out.push_back({i, 1, Action::kInsert});
    } else if (tags[i] == Tag::kBReplace) {
      std::size_t j = i + 1;
      while (j < tags.size() && tags[j] == Tag::kI) ++j;
      out.push_back({i, j - i, Action::kReplace});
      i = j - 1;
    }
  }
  return out;
}

double detect_loss_backward(const ModelParams& params, const Matrix& question_vecs,
                            std::span<const Tag> gold, double scale, ModelParams& grad,
                            Matrix& dquestion) {
  if (gold.size() != static_cast<std::size_t>(question_vecs.rows()))
    throw ShapeError("gold tag count does not match question length");
  auto dist = tag_probs(params, question_vecs);
  dquestion = Matrix::Zero(question_vecs.rows(), question_vecs.cols());
  double loss = 0;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    auto g = static_cast<std::size_t>(gold[k]);
    if (g >= kNumTags) throw LabelError("gold tag outside the alphabet");
    double p = dist[k][g];
    if (p < kProbFloor) {
      loss += -std::log(kProbFloor);
      continue;  // clamped: constant in the parameters
    }
    loss += -std::log(p);
    RowVector dlogits(kNumTags);
    for (std::size_t t = 0; t < kNumTags; ++t)
      dlogits(static_cast<Eigen::Index>(t)) = scale * (dist[k][t] - (t == g ? 1.0 : 0.0));
    const auto row = static_cast<Eigen::Index>(k);
    grad.detect_w += dlogits.transpose() * question_vecs.row(row);
    grad.detect_b.row(0) += dlogits;
    dquestion.row(row) = dlogits * params.detect_w;
  }
  return loss;
}

}  // namespace qrw
