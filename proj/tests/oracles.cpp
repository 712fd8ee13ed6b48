#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace oracle {

using qrw::DiffBlock;

Block brute_longest(const std::vector<int>& a, std::size_t alo, std::size_t ahi,
                    const std::vector<int>& b, std::size_t blo, std::size_t bhi) {
  Block best{alo, blo, 0};
  for (std::size_t i = alo; i < ahi; ++i) {
    for (std::size_t j = blo; j < bhi; ++j) {
      std::size_t k = 0;
      while (i + k < ahi && j + k < bhi && a[i + k] == b[j + k]) ++k;
      if (k > best.k) best = {i, j, k};
    }
  }
  return best;
}

namespace {

void recurse(const std::vector<int>& a, std::size_t alo, std::size_t ahi, const std::vector<int>& b,
             std::size_t blo, std::size_t bhi, std::vector<Block>& out) {
  if (alo >= ahi || blo >= bhi) return;
  Block m = brute_longest(a, alo, ahi, b, blo, bhi);
  if (m.k == 0) return;
  recurse(a, alo, m.i, b, blo, m.j, out);
  out.push_back(m);
  recurse(a, m.i + m.k, ahi, b, m.j + m.k, bhi, out);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

using Mat = std::vector<std::vector<double>>;

Mat linear(const Mat& x, const qrw::Matrix& w, const qrw::Matrix& b) {
  Mat y(x.size(), std::vector<double>(static_cast<std::size_t>(w.cols()), 0.0));
  for (std::size_t t = 0; t < x.size(); ++t)
    for (Eigen::Index o = 0; o < w.cols(); ++o) {
      double s = b(0, o);
      for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[t][static_cast<std::size_t>(i)] * w(i, o);
      y[t][static_cast<std::size_t>(o)] = s;
    }
  return y;
}

Mat norm(const Mat& x, const qrw::Matrix& g, const qrw::Matrix& b, double eps) {
  Mat y = x;
  for (std::size_t t = 0; t < x.size(); ++t) {
    double mean = 0, var = 0;
    for (double v : x[t]) mean += v;
    mean /= static_cast<double>(x[t].size());
    for (double v : x[t]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x[t].size());
    for (std::size_t i = 0; i < x[t].size(); ++i)
      y[t][i] = g(0, static_cast<Eigen::Index>(i)) * (x[t][i] - mean) / std::sqrt(var + eps) +
                b(0, static_cast<Eigen::Index>(i));
  }
  return y;
}

}  // namespace

std::vector<DiffBlock> brute_diff(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<Block> raw;
  recurse(a, 0, a.size(), b, 0, b.size(), raw);
  std::vector<Block> merged;
  for (const auto& m : raw) {
    if (!merged.empty() && merged.back().i + merged.back().k == m.i && merged.back().j + merged.back().k == m.j)
      merged.back().k += m.k;
    else
      merged.push_back(m);
  }
  merged.push_back({a.size(), b.size(), 0});
  std::vector<DiffBlock> out;
  std::size_t i = 0, j = 0;
  for (const auto& m : merged) {
    DiffBlock::Kind kind{};
    bool gap = true;
    if (m.i > i && m.j > j) kind = DiffBlock::Kind::kReplace;
    else if (m.i > i) kind = DiffBlock::Kind::kDelete;
    else if (m.j > j) kind = DiffBlock::Kind::kInsert;
    else gap = false;
    if (gap) out.push_back({kind, {i, m.i}, {j, m.j}});
    if (m.k) out.push_back({DiffBlock::Kind::kEqual, {m.i, m.i + m.k}, {m.j, m.j + m.k}});
    i = m.i + m.k;
    j = m.j + m.k;
  }
  return out;
}

std::vector<std::vector<double>> encoder_forward(const qrw::ModelParams& p, const std::vector<int>& ids) {
  const auto& cfg = p.config;
  const std::size_t T = ids.size(), d = static_cast<std::size_t>(cfg.d);
  Mat x(T, std::vector<double>(d));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < d; ++i)
      x[t][i] = p.token_embedding(ids[t], static_cast<Eigen::Index>(i)) +
                p.position_embedding(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));

  const std::size_t H = static_cast<std::size_t>(cfg.heads), dh = d / H;
  for (const auto& L : p.layers) {
    Mat q = linear(x, L.wq, L.bq), k = linear(x, L.wk, L.bk), v = linear(x, L.wv, L.bv);
    Mat mixed(T, std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> s(T);
        double mx = -1e300;
        for (std::size_t u = 0; u < T; ++u) {
          double dot = 0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[t][c] * k[u][c];
          s[u] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[u]);
        }
        double z = 0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (std::size_t u = 0; u < T; ++u)
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) mixed[t][c] += s[u] / z * v[u][c];
      }
    }
    Mat attn = linear(mixed, L.wo, L.bo);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < d; ++i) attn[t][i] += x[t][i];
    Mat y = norm(attn, L.ln1_gain, L.ln1_bias, cfg.layer_norm_eps);
    Mat hidden = linear(y, L.w1, L.b1);
    for (auto& row : hidden)
      for (auto& e : row) e = cfg.activation == qrw::Activation::kGelu ? gelu(e) : std::tanh(e);
    Mat f = linear(hidden, L.w2, L.b2);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < d; ++i) f[t][i] += y[t][i];
    x = norm(f, L.ln2_gain, L.ln2_bias, cfg.layer_norm_eps);
  }
  return x;
}

std::vector<double> span_head(const qrw::ModelParams& p, const std::vector<std::vector<double>>& ctx,
                              const std::vector<double>& query, int which) {
  const auto& W = which == 0 ? p.start_w : p.end_w;
  const auto& B = which == 0 ? p.start_b : p.end_b;
  const auto& V = which == 0 ? p.start_v : p.end_v;
  const std::size_t d = query.size();
  std::vector<double> score(ctx.size());
  for (std::size_t t = 0; t < ctx.size(); ++t) {
    std::vector<double> cat(ctx[t]);
    cat.insert(cat.end(), query.begin(), query.end());
    double s = 0;
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double z = B(0, r);
      for (std::size_t c = 0; c < 2 * d; ++c) z += W(r, static_cast<Eigen::Index>(c)) * cat[c];
      s += V(0, r) * std::tanh(z);
    }
    score[t] = s;
  }
  double z = 0;
  std::vector<double> out(ctx.size());
  for (std::size_t t = 0; t < ctx.size(); ++t) z += std::exp(score[t]);
  for (std::size_t t = 0; t < ctx.size(); ++t) out[t] = std::exp(score[t]) / z;
  return out;
}

qrw::ContextSpan brute_select(const std::vector<double>& s, const std::vector<double>& e, std::size_t max_len) {
  qrw::ContextSpan best{0, 0};
  double top = -1;
  // enumerate by (s, e) lexicographic order; strict improvement keeps the first
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < e.size(); ++b) {
      if (b < a || b - a + 1 > max_len) continue;
      if (s[a] * e[b] > top) {
        top = s[a] * e[b];
        best = {a, b};
      }
    }
  return best;
}

std::size_t ngram_overlap(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, int n,
                          std::size_t* ref_total) {
  const auto k = static_cast<std::size_t>(n);
  std::vector<bool> used(hyp.size() >= k ? hyp.size() - k + 1 : 0, false);
  std::size_t overlap = 0, total = 0;
  for (std::size_t r = 0; r + k <= ref.size(); ++r) {
    ++total;
    // greedy one-to-one pairing with an unused identical hypothesis n-gram
    for (std::size_t h = 0; h < used.size(); ++h) {
      if (used[h]) continue;
      if (std::equal(ref.begin() + static_cast<std::ptrdiff_t>(r), ref.begin() + static_cast<std::ptrdiff_t>(r + k),
                     hyp.begin() + static_cast<std::ptrdiff_t>(h))) {
        used[h] = true;
        ++overlap;
        break;
      }
    }
  }
  if (ref_total) *ref_total = total;
  return overlap;
}

std::size_t lcs_memo(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t r = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    memo[key] = r;
    return r;
  };
  return go(0, 0);
}

qrw::Tokens toks(const std::vector<std::string>& words) {
  qrw::Tokens out;
  for (const auto& w : words) out.push_back(qrw::Token{w});
  return out;
}

qrw::Example planted_example(std::mt19937_64& rng, int id) {
  auto uni = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto word = [&] { return "w" + std::to_string(uni(0, 24)); };

  qrw::Example ex;
  ex.id = "synthetic-" + std::to_string(id);
  const int utts = uni(1, 3);
  for (int u = 0; u < utts; ++u) {
    std::vector<std::string> ws;
    for (int i = uni(3, 8); i > 0; --i) ws.push_back(word());
    ex.context.push_back(toks(ws));
  }
  const auto ctx = qrw::flatten_context(ex);

  std::vector<std::string> q;
  for (int i = uni(2, 7); i > 0; --i) q.push_back(word());
  ex.question = toks(q);

  auto segment = [&] {
    const int len = uni(1, 3);
    const int start = uni(0, static_cast<int>(ctx.size()) - 1);
    std::vector<std::string> seg;
    for (int i = start; i < std::min<int>(start + len, static_cast<int>(ctx.size())); ++i)
      seg.push_back(ctx[static_cast<std::size_t>(i)].text);
    return seg;
  };

  // Edits are planted right to left so earlier positions stay valid.
  std::vector<std::string> r = q;
  int limit = static_cast<int>(r.size());
  for (int e = uni(1, 3); e > 0 && limit > 0; --e) {
    if (uni(0, 1) == 0) {
      const int len = uni(1, 2);
      const int start = uni(0, limit - 1);
      const int end = std::min(start + len, limit);
      auto seg = segment();
      r.erase(r.begin() + start, r.begin() + end);
      r.insert(r.begin() + start, seg.begin(), seg.end());
      limit = start - 1;
    } else {
      const int pos = uni(0, limit);
      auto seg = segment();
      r.insert(r.begin() + pos, seg.begin(), seg.end());
      limit = pos - 1;
    }
  }
  ex.rewrite = toks(r);
  return ex;
}

}  // namespace oracle
