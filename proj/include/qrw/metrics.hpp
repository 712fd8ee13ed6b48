#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qrw/corpus.hpp"

namespace qrw {

using Sentence = std::vector<std::string>;

// Sentence BLEU with uniform weights over orders 1..n, clipped n-gram
// precision and brevity penalty min(1, exp(1 - r/c)). Orders for which the
// hypothesis has no n-grams are left out of the geometric mean; any zero
// precision among the remaining orders gives 0. No smoothing.
double bleu(const Sentence& hyp, std::span<const Sentence> refs, int n);
double bleu(const Sentence& hyp, const Sentence& ref, int n);

// Corpus BLEU: clipped counts and lengths are summed before the ratios.
double corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int n);

// Clipped n-gram recall against the reference. A reference shorter than n
// scores 0 and, when `warnings` is given, appends a message.
double rouge_n(const Sentence& hyp, const Sentence& ref, int n,
               std::vector<std::string>* warnings = nullptr);

std::size_t lcs_length(const Sentence& a, const Sentence& b);

// LCS F-measure with beta = 1.2.
double rouge_l(const Sentence& hyp, const Sentence& ref, double beta = 1.2);

bool exact_match(const Sentence& hyp, const Sentence& ref);

struct EvalCounts {
  std::size_t total = 0;
  std::size_t positive = 0;  // question differs from the reference
  std::size_t negative = 0;
};

struct EvalReport {
  double em = 0;
  double em_positive = 0;  // EM over the positive examples only
  std::map<int, double> bleu;           // corpus BLEU-1..4
  std::map<int, double> sentence_bleu;  // mean sentence BLEU-1..4
  std::map<std::string, double> rouge;  // "1", "2", "L": mean over examples
  EvalCounts counts;
};

EvalReport evaluate(std::span<const Sentence> preds, std::span<const Sentence> golds,
                    std::span<const Sentence> questions);

struct SplitReport {
  EvalReport positive;
  EvalReport negative;
};

SplitReport split_report(std::span<const Sentence> preds, std::span<const Sentence> golds,
                         std::span<const Sentence> questions);

std::string format_table(const EvalReport& report, const std::string& title);

}  // namespace qrw
