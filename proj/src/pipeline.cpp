#include "qrw/pipeline.hpp"

#include <json.hpp>

#include "qrw/comprehend.hpp"
#include "qrw/detect.hpp"
#include "qrw/error.hpp"

namespace qrw {

namespace {

Prediction copy_of(const Example& example, std::string message) {
  Prediction p;
  p.id = example.id;
  p.tokens = example.question;
  p.plan.source = example.question;
  p.error = true;
  p.message = std::move(message);
  return p;
}

}  // namespace

Prediction predict(const ModelParams& params, const Vocabulary& vocab, const Example& example,
                   const PredictOptions& opts) {
  try {
    Example bound = example;
    vocab.bind(bound);
    auto seq = assemble(bound);
    auto out = encode(params, seq);

    Prediction pred;
    pred.id = example.id;
    pred.tags = greedy_decode(tag_probs(params, out.question));
    auto spans = extract_spans(pred.tags);

    const Tokens context = flatten_context(example);
    std::vector<ContextSpan> answers;
    std::vector<QuestionSpan> kept;
    for (std::size_t c = 0; c < spans.size(); ++c) {
      if (context.empty()) {
        pred.warnings.push_back("no context to ground the span at slot " + std::to_string(spans[c].start));
        continue;
      }
      auto dist = span_probs(params, out.context, out.question.row(static_cast<Eigen::Index>(spans[c].start)), c);
      answers.push_back(select_span(dist, opts.max_answer_len));
      kept.push_back(spans[c]);
    }
    auto plan = plan_from_prediction(pred.tags, kept, answers, example.question, context);
    pred.plan = resolve_conflicts(std::move(plan), [&pred](const std::string& w) { pred.warnings.push_back(w); });
    pred.tokens = apply(pred.plan);
    return pred;
  } catch (const std::exception& e) {
    return copy_of(example, e.what());
  }
}

Prediction predict_oracle(const Example& example) {
  try {
    auto labels = derive_labels(example);
    if (auto* bad = std::get_if<Invalid>(&labels))
      return copy_of(example, "invalid sample: " + std::string(to_string(bad->reason)));
    const auto& labeled = std::get<LabeledExample>(labels);
    Prediction pred;
    pred.id = example.id;
    pred.tags = labeled.tags;
    pred.plan = plan_from_labels(labeled);
    pred.tokens = apply(pred.plan);
    return pred;
  } catch (const std::exception& e) {
    return copy_of(example, e.what());
  }
}

std::string to_json_line(const Prediction& pred, TokenMode mode) {
  nlohmann::json j;
  j["id"] = pred.id;
  j["prediction"] = join(pred.tokens, mode);
  j["edits"] = nlohmann::json::array();
  for (const auto& e : pred.plan.edits) {
    nlohmann::json je{{"action", std::string(to_string(e.action))},
                      {"q_start", e.span.start},
                      {"q_len", e.span.length},
                      {"target", join(e.target, mode)}};
    if (e.source) {
      je["ctx_start"] = e.source->start;
      je["ctx_end"] = e.source->end;
    }
    j["edits"].push_back(std::move(je));
  }
  if (pred.error) {
    j["error"] = true;
    j["message"] = pred.message;
  }
  return j.dump();
}

}  // namespace qrw
