#include "qrw/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <iomanip>

#include "qrw/error.hpp"

namespace qrw {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Sentence& s, int n) {
  NgramCounts out;
  const auto k = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + k <= s.size(); ++i) ++out[Sentence(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + k))];
  return out;
}

struct OrderStats {
  std::size_t clipped = 0;
  std::size_t total = 0;
};

OrderStats clipped_counts(const Sentence& hyp, std::span<const Sentence> refs, int n) {
  OrderStats st;
  auto h = ngrams(hyp, n);
  NgramCounts max_ref;
  for (const auto& r : refs)
    for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
  for (const auto& [g, c] : h) {
    st.total += c;
    auto it = max_ref.find(g);
    if (it != max_ref.end()) st.clipped += std::min(c, it->second);
  }
  return st;
}

// Reference length closest to the hypothesis length, shorter on ties.
std::size_t closest_ref_length(std::size_t c, std::span<const Sentence> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    auto dr = static_cast<long>(r.size()) - static_cast<long>(c);
    auto db = static_cast<long>(best) - static_cast<long>(c);
    if (std::labs(dr) < std::labs(db) || (std::labs(dr) == std::labs(db) && r.size() < best)) best = r.size();
  }
  return best;
}

double combine(std::span<const OrderStats> orders, double c, double r) {
  if (c == 0) return 0.0;
  double log_sum = 0;
  int used = 0;
  for (const auto& o : orders) {
    if (o.total == 0) continue;
    if (o.clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(o.clipped) / static_cast<double>(o.total));
    ++used;
  }
  if (used == 0) return 0.0;
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / used);
}

void check_order(int n, int max) {
  if (n < 1 || n > max) throw Error("n-gram order " + std::to_string(n) + " out of range");
}

}  // namespace

double bleu(const Sentence& hyp, std::span<const Sentence> refs, int n) {
  check_order(n, 4);
  if (refs.empty()) throw Error("bleu needs at least one reference");
  if (hyp.empty()) return 0.0;
  std::vector<OrderStats> orders;
  for (int k = 1; k <= n; ++k) orders.push_back(clipped_counts(hyp, refs, k));
  return combine(orders, static_cast<double>(hyp.size()),
                 static_cast<double>(closest_ref_length(hyp.size(), refs)));
}

double bleu(const Sentence& hyp, const Sentence& ref, int n) {
  return bleu(hyp, std::span<const Sentence>(&ref, 1), n);
}

double corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int n) {
  check_order(n, 4);
  if (hyps.size() != refs.size()) throw ShapeError("corpus_bleu: hypothesis and reference counts differ");
  std::vector<OrderStats> orders(static_cast<std::size_t>(n));
  double c = 0, r = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    c += static_cast<double>(hyps[i].size());
    r += static_cast<double>(refs[i].size());
    for (int k = 1; k <= n; ++k) {
      auto st = clipped_counts(hyps[i], refs.subspan(i, 1), k);
      orders[static_cast<std::size_t>(k - 1)].clipped += st.clipped;
      orders[static_cast<std::size_t>(k - 1)].total += st.total;
    }
  }
  return combine(orders, c, r);
}

double rouge_n(const Sentence& hyp, const Sentence& ref, int n, std::vector<std::string>* warnings) {
  check_order(n, 2);
  auto r = ngrams(ref, n);
  std::size_t total = 0;
  for (const auto& [g, c] : r) total += c;
  if (total == 0) {
    if (warnings) warnings->push_back("reference shorter than " + std::to_string(n) + " tokens");
    return 0.0;
  }
  auto h = ngrams(hyp, n);
  std::size_t overlap = 0;
  for (const auto& [g, c] : r) {
    auto it = h.find(g);
    if (it != h.end()) overlap += std::min(c, it->second);
  }
  return static_cast<double>(overlap) / static_cast<double>(total);
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Sentence& hyp, const Sentence& ref, double beta) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0) return 0.0;
  const double rec = lcs / static_cast<double>(ref.size());
  const double prec = lcs / static_cast<double>(hyp.size());
  const double b2 = beta * beta;
  return (1 + b2) * rec * prec / (rec + b2 * prec);
}

bool exact_match(const Sentence& hyp, const Sentence& ref) { return hyp == ref; }

EvalReport evaluate(std::span<const Sentence> preds, std::span<const Sentence> golds,
                    std::span<const Sentence> questions) {
  if (preds.size() != golds.size() || preds.size() != questions.size())
    throw ShapeError("evaluate: prediction, gold and question counts differ");
  EvalReport rep;
  rep.counts.total = preds.size();
  std::size_t em = 0, em_pos = 0;
  std::map<int, double> sbleu;
  double r1 = 0, r2 = 0, rl = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool match = exact_match(preds[i], golds[i]);
    const bool positive = questions[i] != golds[i];
    em += match;
    if (positive) {
      ++rep.counts.positive;
      em_pos += match;
    } else {
      ++rep.counts.negative;
    }
    for (int n = 1; n <= 4; ++n) sbleu[n] += bleu(preds[i], golds[i], n);
    r1 += rouge_n(preds[i], golds[i], 1);
    r2 += rouge_n(preds[i], golds[i], 2);
    rl += rouge_l(preds[i], golds[i]);
  }
  const double total = static_cast<double>(std::max<std::size_t>(rep.counts.total, 1));
  rep.em = static_cast<double>(em) / total;
  rep.em_positive = rep.counts.positive ? static_cast<double>(em_pos) / static_cast<double>(rep.counts.positive) : 0.0;
  for (int n = 1; n <= 4; ++n) {
    rep.bleu[n] = preds.empty() ? 0.0 : corpus_bleu(preds, golds, n);
    rep.sentence_bleu[n] = sbleu[n] / total;
  }
  rep.rouge["1"] = r1 / total;
  rep.rouge["2"] = r2 / total;
  rep.rouge["L"] = rl / total;
  return rep;
}

SplitReport split_report(std::span<const Sentence> preds, std::span<const Sentence> golds,
                         std::span<const Sentence> questions) {
  if (preds.size() != golds.size() || preds.size() != questions.size())
    throw ShapeError("split_report: prediction, gold and question counts differ");
  std::vector<Sentence> pp, pg, pq, np, ng, nq;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    bool positive = questions[i] != golds[i];
    (positive ? pp : np).push_back(preds[i]);
    (positive ? pg : ng).push_back(golds[i]);
    (positive ? pq : nq).push_back(questions[i]);
  }
  return {evaluate(pp, pg, pq), evaluate(np, ng, nq)};
}

std::string format_table(const EvalReport& r, const std::string& title) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << title << " (n=" << r.counts.total << ", positive=" << r.counts.positive
     << ", negative=" << r.counts.negative << ")\n";
  os << "  EM      B1      B2      B3      B4      R1      R2      RL\n";
  os << "  " << std::setw(6) << 100 * r.em;
  for (int n = 1; n <= 4; ++n) os << "  " << std::setw(6) << 100 * r.bleu.at(n);
  for (const char* k : {"1", "2", "L"}) os << "  " << std::setw(6) << 100 * r.rouge.at(k);
  os << "\n  EM on positive examples: " << 100 * r.em_positive << "\n";
  os << "  ROUGE-L is the LCS F-measure with beta = 1.2\n";
  return os.str();
}

}  // namespace qrw
