#pragma once

#include <string>
#include <vector>

#include "qrw/corpus.hpp"
#include "qrw/encoder.hpp"
#include "qrw/labeler.hpp"
#include "qrw/rewriter.hpp"

namespace qrw {

struct PredictOptions {
  std::size_t max_answer_len = 30;
};

struct Prediction {
  std::string id;
  Tokens tokens;
  EditPlan plan;
  std::vector<Tag> tags;
  std::vector<std::string> warnings;
  bool error = false;  // set when the example fell back to a copy
  std::string message;
};

// assemble -> encode -> tag_probs -> greedy_decode -> extract_spans ->
// span_probs / select_span -> plan_from_prediction -> apply. Any failure is
// caught and reported as a copy of the question with `error` set.
Prediction predict(const ModelParams& params, const Vocabulary& vocab, const Example& example,
                   const PredictOptions& opts = {});

// Applies the edits derived from the gold rewrite instead of model output.
Prediction predict_oracle(const Example& example);

// {"id", "prediction", "edits": [...], "error"?} on one line.
std::string to_json_line(const Prediction& pred, TokenMode mode);

}  // namespace qrw
