#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qrw/corpus.hpp"

namespace qrw {

// Tag alphabet. The numeric order is the column order of every tag
// distribution and of the detect head's output rows.
enum class Tag : int { kBInsert = 0, kBReplace = 1, kI = 2, kO = 3 };
inline constexpr std::size_t kNumTags = 4;

std::string_view to_string(Tag tag);
Tag parse_tag(std::string_view name);  // throws LabelError

enum class Action { kInsert, kReplace };

std::string_view to_string(Action action);
Action parse_action(std::string_view name);

struct DiffBlock {
  enum class Kind { kEqual, kReplace, kInsert, kDelete };
  Kind kind;
  Range a;  // question side
  Range b;  // rewrite side
  friend bool operator==(const DiffBlock&, const DiffBlock&) = default;
};

// Longest-matching-block diff over token texts. No junk heuristics; ties go
// to the smallest start in `a`, then the smallest start in `b`. Adjacent
// matches are merged, so every gap yields exactly one non-equal block.
std::vector<DiffBlock> diff(const Tokens& a, const Tokens& b);

// Same algorithm over raw ids; the token overload maps texts to ids first.
std::vector<DiffBlock> diff_ids(const std::vector<int>& a, const std::vector<int>& b);

// Question positions are "slots": slot 0 is the BOS sentinel and slot k+1 is
// question token k. This is also the row index into the encoder's question
// vectors.
struct QuestionSpan {
  std::size_t start = 0;
  std::size_t length = 1;
  Action action = Action::kReplace;
  friend bool operator==(const QuestionSpan&, const QuestionSpan&) = default;
};

// Inclusive context token interval.
struct ContextSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const ContextSpan&, const ContextSpan&) = default;
};

struct Query {
  QuestionSpan question;
  ContextSpan answer;
};

struct LabeledExample {
  Example example;
  std::vector<Tag> tags;  // n + 1 entries, BOS first
  std::vector<Query> queries;
};

struct Invalid {
  enum class Reason { kDeleteBlock, kAnswerNotFound };
  Reason reason;
};

std::string_view to_string(Invalid::Reason reason);

using LabelResult = std::variant<LabeledExample, Invalid>;

// Leftmost occurrence of `target` in `context`.
std::optional<ContextSpan> find_answer(const Tokens& target, const Tokens& context);

// Derives tags and grounded queries from the gold rewrite. Requires
// example.rewrite; throws LabelError otherwise.
LabelResult derive_labels(const Example& example, const Tokens& context_tokens);
LabelResult derive_labels(const Example& example);

// Stop words used for augmentation. Matches resources/stopwords_en.txt.
const std::set<std::string>& default_stopwords();
std::set<std::string> load_stopwords(const std::string& path);

// Drops every stop word from the question. Returns zero or one variant.
std::vector<Example> augment(const Example& example, const std::set<std::string>& stopwords);

// Labeled JSONL record: {"id", "tags", "queries", "context", "question",
// "rewrite"}; q_start is a slot index (0 = BOS).
std::string to_json_line(const LabeledExample& labeled, TokenMode mode);
LabeledExample parse_labeled_line(std::string_view line, std::size_t line_no, TokenMode mode);
std::vector<LabeledExample> load_labeled(const std::string& path, TokenMode mode);

}  // namespace qrw
