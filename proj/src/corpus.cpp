#include "qrw/corpus.hpp"

#include <cctype>
#include <fstream>

#include <json.hpp>

#include "qrw/error.hpp"

namespace qrw {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

// Length in bytes of the UTF-8 sequence introduced by `lead`.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte, keep it on its own
}

void split_word(std::string_view word, Tokens& out) {
  std::size_t core = word.size();
  while (core > 1 && is_ascii_punct(static_cast<unsigned char>(word[core - 1]))) --core;
  out.push_back(Token{std::string(word.substr(0, core))});
  for (std::size_t i = core; i < word.size(); ++i) out.push_back(Token{std::string(1, word[i])});
}

Tokens tokenize_field(const nlohmann::json& value, std::size_t line, const char* field,
                      TokenMode mode) {
  try {
    return tokenize(value.get<std::string>(), mode);
  } catch (const EmptyText&) {
    throw SchemaError(line, std::string("field '") + field + "' is empty");
  }
}

}  // namespace

TokenMode parse_token_mode(std::string_view name) {
  if (name == "word") return TokenMode::kWord;
  if (name == "char") return TokenMode::kChar;
  throw Error("unknown token mode '" + std::string(name) + "'");
}

std::string_view to_string(TokenMode mode) { return mode == TokenMode::kWord ? "word" : "char"; }

Tokens tokenize(std::string_view text, TokenMode mode) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    if (mode == TokenMode::kChar) {
      std::size_t len = std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
      out.push_back(Token{std::string(text.substr(i, len))});
      i += len;
    } else {
      std::size_t j = i;
      while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
      split_word(text.substr(i, j - i), out);
      i = j;
    }
  }
  if (out.empty()) throw EmptyText();
  return out;
}

std::string join(const Tokens& tokens, TokenMode mode) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && mode == TokenMode::kWord) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

std::vector<std::string> texts(const Tokens& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

Tokens flatten_context(const Example& example) {
  Tokens out;
  for (const auto& utt : example.context) out.insert(out.end(), utt.begin(), utt.end());
  return out;
}

std::size_t context_length(const Example& example) {
  std::size_t m = 0;
  for (const auto& utt : example.context) m += utt.size();
  return m;
}

Example parse_example(std::string_view json_line, std::size_t line, TokenMode mode) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line, e.what());
  }
  if (!j.is_object()) throw SchemaError(line, "record is not a JSON object");

  Example ex;
  ex.line = line;
  if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
    ex.id = it->is_string() ? it->get<std::string>() : it->dump();
  } else {
    ex.id = "line-" + std::to_string(line);
  }

  auto q = j.find("question");
  if (q == j.end() || !q->is_string()) throw SchemaError(line, "missing string field 'question'");
  ex.question = tokenize_field(*q, line, "question", mode);

  auto c = j.find("context");
  if (c == j.end() || !c->is_array()) throw SchemaError(line, "missing array field 'context'");
  for (const auto& utt : *c) {
    if (!utt.is_string()) throw SchemaError(line, "context entries must be strings");
    try {
      ex.context.push_back(tokenize(utt.get<std::string>(), mode));
    } catch (const EmptyText&) {
      // blank utterances carry no tokens and are dropped
    }
  }

  if (auto r = j.find("rewrite"); r != j.end() && !r->is_null()) {
    if (!r->is_string()) throw SchemaError(line, "field 'rewrite' must be a string");
    ex.rewrite = tokenize_field(*r, line, "rewrite", mode);
  }
  return ex;
}

std::vector<Example> load_corpus(const std::filesystem::path& path, TokenMode mode) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Example> out;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    if (buf.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    out.push_back(parse_example(buf, line, mode));
  }
  return out;
}

JointSequence assemble(const Example& example) {
  JointSequence seq;
  for (const auto& utt : example.context) {
    for (const auto& tok : utt) {
      seq.context_positions.push_back(seq.tokens.size());
      seq.tokens.push_back(tok);
    }
    seq.tokens.push_back(Token{std::string(kSepText), kSepId});
  }
  seq.bos_index = seq.tokens.size();
  seq.tokens.push_back(Token{std::string(kBosText), kBosId});
  seq.question_range.begin = seq.tokens.size();
  seq.tokens.insert(seq.tokens.end(), example.question.begin(), example.question.end());
  seq.question_range.end = seq.tokens.size();
  return seq;
}

Vocabulary::Vocabulary() {
  for (auto w : {kSepText, kBosText, kUnkText}) add(std::string(w));
}

int Vocabulary::add(const std::string& text) {
  auto [it, inserted] = index_.try_emplace(text, static_cast<int>(words_.size()));
  if (inserted) words_.push_back(text);
  return it->second;
}

int Vocabulary::lookup(std::string_view text) const {
  auto it = index_.find(std::string(text));
  return it == index_.end() ? kUnkId : it->second;
}

Vocabulary Vocabulary::build(const std::vector<Example>& examples) {
  Vocabulary v;
  auto add_all = [&v](const Tokens& ts) {
    for (const auto& t : ts) v.add(t.text);
  };
  for (const auto& ex : examples) {
    for (const auto& utt : ex.context) add_all(utt);
    add_all(ex.question);
    if (ex.rewrite) add_all(*ex.rewrite);
  }
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.size() < 3 || words[0] != kSepText || words[1] != kBosText || words[2] != kUnkText)
    throw Error("vocabulary must start with the reserved tokens");
  Vocabulary v;
  for (std::size_t i = 3; i < words.size(); ++i) v.add(words[i]);
  if (v.size() != words.size()) throw Error("vocabulary contains duplicate entries");
  return v;
}

void Vocabulary::bind(Tokens& tokens) const {
  for (auto& t : tokens) t.id = lookup(t.text);
}

void Vocabulary::bind(Example& example) const {
  for (auto& utt : example.context) bind(utt);
  bind(example.question);
  if (example.rewrite) bind(*example.rewrite);
}

}  // namespace qrw
