#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qrw/corpus.hpp"
#include "qrw/labeler.hpp"

namespace qrw {

struct Edit {
  Action action = Action::kReplace;
  QuestionSpan span;  // slot coordinates, 0 = BOS
  Tokens target;
  std::optional<ContextSpan> source;  // where the target was taken from, if known
};

struct EditPlan {
  std::vector<Edit> edits;  // sorted by span.start
  Tokens source;            // the question, without BOS
};

// Throws ConflictError if replace spans overlap, an insert host lies inside a
// replace span, two inserts share a host, or a span leaves the question.
void validate(const EditPlan& plan);

// Applies the plan right to left: a replace substitutes the covered tokens,
// an insert places its target after the host token (after BOS = at the
// front). An empty plan copies the question.
Tokens apply(const EditPlan& plan);

// Pairs each predicted span with the context tokens of its selected answer.
// The action comes from the B tag at the span start. Throws ShapeError on a
// length mismatch.
EditPlan plan_from_prediction(std::span<const Tag> tags, std::span<const QuestionSpan> spans,
                              std::span<const ContextSpan> answers, const Tokens& question,
                              const Tokens& context_tokens);

// Gold plan from derived labels.
EditPlan plan_from_labels(const LabeledExample& labeled);

// Drops edits that cannot be applied (replace on BOS, overlaps, inserts inside
// a replace); on a conflict the later-starting edit loses. `warn` receives a
// message for each dropped edit.
EditPlan resolve_conflicts(EditPlan plan, const std::function<void(const std::string&)>& warn = {});

}  // namespace qrw
