#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qrw {

// Reserved vocabulary ids.
inline constexpr int kSepId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kFirstWordId = 3;

inline constexpr std::string_view kSepText = "[SEP]";
inline constexpr std::string_view kBosText = "[BOS]";
inline constexpr std::string_view kUnkText = "[UNK]";

struct Token {
  std::string text;
  int id = kUnkId;

  // Tokens compare by surface text; ids are a property of the vocabulary.
  friend bool operator==(const Token& a, const Token& b) { return a.text == b.text; }
};

using Tokens = std::vector<Token>;

enum class TokenMode { kWord, kChar };

TokenMode parse_token_mode(std::string_view name);
std::string_view to_string(TokenMode mode);

// Word mode splits on whitespace and detaches trailing ASCII punctuation;
// char mode yields one token per non-whitespace UTF-8 code point.
// Throws EmptyText when nothing but whitespace is given.
Tokens tokenize(std::string_view text, TokenMode mode);

std::string join(const Tokens& tokens, TokenMode mode = TokenMode::kWord);
std::vector<std::string> texts(const Tokens& tokens);

struct Example {
  std::string id;
  std::size_t line = 0;  // 1-based source line, 0 when built in memory
  std::vector<Tokens> context;
  Tokens question;
  std::optional<Tokens> rewrite;
};

// Context utterances concatenated in order (length m).
Tokens flatten_context(const Example& example);
std::size_t context_length(const Example& example);

// Parses one JSONL record. Throws ParseError on malformed JSON and
// SchemaError when a required field is missing or mistyped.
Example parse_example(std::string_view json_line, std::size_t line, TokenMode mode);

// Reads a whole JSONL corpus in file order. Blank lines are skipped.
std::vector<Example> load_corpus(const std::filesystem::path& path, TokenMode mode);

// Half-open index interval.
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const Range&, const Range&) = default;
};

// u_1 SEP u_2 SEP ... u_{i-1} SEP BOS q_1 ... q_n
struct JointSequence {
  Tokens tokens;
  std::vector<std::size_t> context_positions;  // m positions, separators excluded
  Range question_range;
  std::size_t bos_index = 0;

  std::size_t size() const { return tokens.size(); }
};

JointSequence assemble(const Example& example);

// Maps token text to id. Ids 0..2 are reserved for SEP, BOS and UNK.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(const std::vector<Example>& examples);

  int add(const std::string& text);
  int lookup(std::string_view text) const;
  const std::string& text(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  static Vocabulary from_words(std::vector<std::string> words);

  void bind(Tokens& tokens) const;
  void bind(Example& example) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace qrw
