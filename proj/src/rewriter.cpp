#include "qrw/rewriter.hpp"

#include <algorithm>

#include "qrw/error.hpp"

namespace qrw {

namespace {

// Returns an empty string when `e` fits alongside `kept`, else the reason.
std::string check_edit(const Edit& e, std::span<const Edit> kept, std::size_t n) {
  if (e.target.empty()) return "empty target";
  if (e.action == Action::kReplace) {
    if (e.span.start == 0) return "replace on the BOS sentinel";
    if (e.span.length == 0 || e.span.start + e.span.length > n + 1) return "replace span out of bounds";
  } else if (e.span.start > n || e.span.length != 1) {
    return "insert host out of bounds";
  }
  const std::size_t a0 = e.span.start, a1 = e.span.start + e.span.length;
  for (const auto& k : kept) {
    const std::size_t b0 = k.span.start, b1 = k.span.start + k.span.length;
    if (e.action == Action::kReplace && k.action == Action::kReplace) {
      if (a0 < b1 && b0 < a1) return "overlapping replace spans";
    } else if (e.action == Action::kInsert && k.action == Action::kInsert) {
      if (a0 == b0) return "two inserts share a host";
    } else if (e.action == Action::kInsert) {
      if (a0 >= b0 && a0 < b1) return "insert host inside a replace span";
    } else {
      if (b0 >= a0 && b0 < a1) return "insert host inside a replace span";
    }
  }
  return {};
}

void sort_by_start(std::vector<Edit>& edits) {
  std::stable_sort(edits.begin(), edits.end(),
                   [](const Edit& x, const Edit& y) { return x.span.start < y.span.start; });
}

}  // namespace

void validate(const EditPlan& plan) {
  const std::size_t n = plan.source.size();
  for (std::size_t i = 0; i < plan.edits.size(); ++i) {
    auto reason = check_edit(plan.edits[i], std::span(plan.edits).first(i), n);
    if (!reason.empty()) throw ConflictError(reason);
  }
}

Tokens apply(const EditPlan& plan) {
  validate(plan);
  struct Step {
    std::size_t anchor;  // question index the edit acts at
    const Edit* edit;
  };
  std::vector<Step> steps;
  for (const auto& e : plan.edits) {
    steps.push_back({e.action == Action::kReplace ? e.span.start - 1 : e.span.start, &e});
  }
  // Right to left; at equal anchors the replace goes first so an insert
  // landing on the same index ends up in front of the replacement.
  std::stable_sort(steps.begin(), steps.end(), [](const Step& x, const Step& y) {
    if (x.anchor != y.anchor) return x.anchor > y.anchor;
    return x.edit->action == Action::kReplace && y.edit->action == Action::kInsert;
  });

  Tokens out = plan.source;
  for (const auto& step : steps) {
    const Edit& e = *step.edit;
    auto at = out.begin() + static_cast<std::ptrdiff_t>(step.anchor);
    if (e.action == Action::kReplace) {
      at = out.erase(at, at + static_cast<std::ptrdiff_t>(e.span.length));
    }
    out.insert(at, e.target.begin(), e.target.end());
  }
  return out;
}

EditPlan plan_from_prediction(std::span<const Tag> tags, std::span<const QuestionSpan> spans,
                              std::span<const ContextSpan> answers, const Tokens& question,
                              const Tokens& context_tokens) {
  if (spans.size() != answers.size()) throw ShapeError("spans and answers differ in length");
  EditPlan plan;
  plan.source = question;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& span = spans[i];
    const auto& ans = answers[i];
    if (ans.start > ans.end || ans.end >= context_tokens.size())
      throw ShapeError("answer span outside the context");
    Edit e;
    e.span = span;
    e.action = span.action;
    if (span.start < tags.size()) {
      if (tags[span.start] == Tag::kBInsert) e.action = Action::kInsert;
      if (tags[span.start] == Tag::kBReplace) e.action = Action::kReplace;
    }
    e.target.assign(context_tokens.begin() + static_cast<std::ptrdiff_t>(ans.start),
                    context_tokens.begin() + static_cast<std::ptrdiff_t>(ans.end + 1));
    e.source = ans;
    plan.edits.push_back(std::move(e));
  }
  sort_by_start(plan.edits);
  return plan;
}

EditPlan plan_from_labels(const LabeledExample& labeled) {
  std::vector<QuestionSpan> spans;
  std::vector<ContextSpan> answers;
  for (const auto& q : labeled.queries) {
    spans.push_back(q.question);
    answers.push_back(q.answer);
  }
  return plan_from_prediction(labeled.tags, spans, answers, labeled.example.question,
                              flatten_context(labeled.example));
}

EditPlan resolve_conflicts(EditPlan plan, const std::function<void(const std::string&)>& warn) {
  sort_by_start(plan.edits);
  std::vector<Edit> kept;
  for (auto& e : plan.edits) {
    auto reason = check_edit(e, kept, plan.source.size());
    if (reason.empty()) {
      kept.push_back(std::move(e));
    } else if (warn) {
      warn("dropped " + std::string(to_string(e.action)) + " edit at slot " +
           std::to_string(e.span.start) + ": " + reason);
    }
  }
  plan.edits = std::move(kept);
  return plan;
}

}  // namespace qrw
