#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "qrw/detect.hpp"

using namespace qrw;

namespace {

ModelParams head_only(int d) {
  EncoderConfig c;
  c.d = d;
  c.layers = 0;
  c.heads = 1;
  c.vocab = 5;
  c.max_len = 8;
  return ModelParams::zeros(c);
}

constexpr Tag O = Tag::kO, BR = Tag::kBReplace, BI = Tag::kBInsert, I = Tag::kI;

}  // namespace

TEST_SUITE("detect") {

TEST_CASE("zero head gives uniform rows") {
  auto p = head_only(4);
  auto dist = tag_probs(p, Matrix::Random(5, 4));
  REQUIRE(dist.size() == 5);
  for (const auto& row : dist)
    for (double x : row) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(greedy_decode(dist) == std::vector<Tag>(5, O));
}

TEST_CASE("closed-form bias-only probability") {
  auto p = head_only(4);
  p.detect_b(0, 0) = 10.0;
  auto dist = tag_probs(p, Matrix::Random(3, 4));
  const double want = std::exp(10.0) / (std::exp(10.0) + 3.0);
  for (const auto& row : dist) CHECK(std::abs(row[0] - want) < 1e-12);
  CHECK(std::abs(want - 0.9998638) < 1e-7);
}

TEST_CASE("shifting every logit of a row leaves the distribution unchanged") {
  std::mt19937_64 rng(9);
  auto p = head_only(4);
  testing::randomize(p, rng, 1.0);
  Matrix h = Matrix::Random(4, 4);
  auto a = tag_probs(p, h);
  p.detect_b.array() += 123.0;
  auto b = tag_probs(p, h);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t j = 0; j < kNumTags; ++j) CHECK(std::abs(a[k][j] - b[k][j]) < 1e-12);
}

TEST_CASE("greedy decode picks the per-slot argmax") {
  TagDistribution dist(6, {0.1, 0.2, 0.3, 0.4});
  dist[3] = {0.1, 0.6, 0.2, 0.1};
  CHECK(greedy_decode(dist) == std::vector<Tag>{O, O, O, BR, O, O});

  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    TagDistribution r(7);
    for (auto& row : r)
      for (auto& x : row) x = u(rng);
    auto got = greedy_decode(r);
    for (std::size_t k = 0; k < r.size(); ++k) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < kNumTags; ++j)
        if (r[k][j] > r[k][best]) best = j;
      CHECK(static_cast<std::size_t>(got[k]) == best);
    }
  }
}

TEST_CASE("ties follow the O, B_replace, B_insert, I order") {
  TagDistribution dist{{0.5, 0.5, 0.0, 0.0}, {0.4, 0.0, 0.4, 0.2}, {0.3, 0.3, 0.1, 0.3}};
  CHECK(greedy_decode(dist) == std::vector<Tag>{BR, BI, O});
}

TEST_CASE("span extraction") {
  std::vector<Tag> fig{O, O, O, BR, BI, O};
  auto spans = extract_spans(fig);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == QuestionSpan{3, 1, Action::kReplace});
  CHECK(spans[1] == QuestionSpan{4, 1, Action::kInsert});

  std::vector<Tag> none(4, O);
  CHECK(extract_spans(none).empty());

  std::vector<Tag> orphan{I, O, BR, I, I};
  spans = extract_spans(orphan);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == QuestionSpan{2, 3, Action::kReplace});

  std::vector<Tag> after_insert{BI, I, O};
  spans = extract_spans(after_insert);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == QuestionSpan{0, 1, Action::kInsert});
}

TEST_CASE("tag loss gradient matches finite differences") {
  std::mt19937_64 rng(11);
  auto p = head_only(3);
  testing::randomize(p, rng, 1.0);
  Matrix h = Matrix::Random(4, 3);
  std::vector<Tag> gold{O, BR, I, BI};
  auto grad = p.zeros_like();
  Matrix dh;
  detect_loss_backward(p, h, gold, 1.0, grad, dh);
  auto loss = [&](const ModelParams& q, const Matrix& x) {
    auto g2 = q.zeros_like();
    Matrix tmp;
    return detect_loss_backward(q, x, gold, 1.0, g2, tmp);
  };
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    Matrix hp = h, hm = h;
    hp.data()[i] += 1e-6;
    hm.data()[i] -= 1e-6;
    CHECK(dh.data()[i] == doctest::Approx((loss(p, hp) - loss(p, hm)) / 2e-6).epsilon(1e-6));
  }
  for (Eigen::Index i = 0; i < p.detect_w.size(); ++i) {
    auto qp = p, qm = p;
    qp.detect_w.data()[i] += 1e-6;
    qm.detect_w.data()[i] -= 1e-6;
    CHECK(grad.detect_w.data()[i] == doctest::Approx((loss(qp, h) - loss(qm, h)) / 2e-6).epsilon(1e-6));
  }
}

}
