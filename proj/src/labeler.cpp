#include "qrw/labeler.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "qrw/error.hpp"

namespace qrw {

namespace {

struct Match {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t size = 0;
};

// Longest common block of a[alo:ahi] and b[blo:bhi]. Scanning i ascending and
// j ascending while only replacing on strictly longer matches gives the
// smallest-i, then smallest-j tie-break.
Match longest_match(const std::vector<int>& a, std::size_t alo, std::size_t ahi,
                    const std::vector<int>& b, std::size_t blo, std::size_t bhi) {
  Match best{alo, blo, 0};
  std::vector<std::size_t> prev(bhi - blo + 1, 0), cur(bhi - blo + 1, 0);
  for (std::size_t i = alo; i < ahi; ++i) {
    for (std::size_t j = blo; j < bhi; ++j) {
      std::size_t k = 0;
      if (a[i] == b[j]) k = prev[j - blo] + 1;
      cur[j - blo + 1] = k;
      if (k > best.size) best = Match{i + 1 - k, j + 1 - k, k};
    }
    std::swap(prev, cur);
    std::fill(cur.begin(), cur.end(), 0);
  }
  return best;
}

void matching_blocks(const std::vector<int>& a, std::size_t alo, std::size_t ahi,
                     const std::vector<int>& b, std::size_t blo, std::size_t bhi,
                     std::vector<Match>& out) {
  if (alo >= ahi || blo >= bhi) return;
  Match m = longest_match(a, alo, ahi, b, blo, bhi);
  if (m.size == 0) return;
  matching_blocks(a, alo, m.i, b, blo, m.j, out);
  out.push_back(m);
  matching_blocks(a, m.i + m.size, ahi, b, m.j + m.size, bhi, out);
}

std::vector<int> intern(const Tokens& tokens, std::unordered_map<std::string, int>& table) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto [it, _] = table.try_emplace(t.text, static_cast<int>(table.size()));
    ids.push_back(it->second);
  }
  return ids;
}

}  // namespace

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::kBInsert: return "B_insert";
    case Tag::kBReplace: return "B_replace";
    case Tag::kI: return "I";
    case Tag::kO: return "O";
  }
  return "?";
}

Tag parse_tag(std::string_view name) {
  if (name == "B_insert") return Tag::kBInsert;
  if (name == "B_replace") return Tag::kBReplace;
  if (name == "I") return Tag::kI;
  if (name == "O") return Tag::kO;
  throw LabelError("unknown tag '" + std::string(name) + "'");
}

std::string_view to_string(Action action) {
  return action == Action::kInsert ? "insert" : "replace";
}

Action parse_action(std::string_view name) {
  if (name == "insert") return Action::kInsert;
  if (name == "replace") return Action::kReplace;
  throw LabelError("unknown action '" + std::string(name) + "'");
}

std::string_view to_string(Invalid::Reason reason) {
  return reason == Invalid::Reason::kDeleteBlock ? "delete_block" : "answer_not_found";
}

std::vector<DiffBlock> diff_ids(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<Match> raw;
  matching_blocks(a, 0, a.size(), b, 0, b.size(), raw);

  std::vector<Match> merged;
  for (const auto& m : raw) {
    if (!merged.empty() && merged.back().i + merged.back().size == m.i &&
        merged.back().j + merged.back().size == m.j) {
      merged.back().size += m.size;
    } else {
      merged.push_back(m);
    }
  }
  merged.push_back(Match{a.size(), b.size(), 0});  // sentinel

  std::vector<DiffBlock> blocks;
  std::size_t i = 0, j = 0;
  for (const auto& m : merged) {
    Range ra{i, m.i}, rb{j, m.j};
    if (ra.size() > 0 && rb.size() > 0) {
      blocks.push_back({DiffBlock::Kind::kReplace, ra, rb});
    } else if (ra.size() > 0) {
      blocks.push_back({DiffBlock::Kind::kDelete, ra, rb});
    } else if (rb.size() > 0) {
      blocks.push_back({DiffBlock::Kind::kInsert, ra, rb});
    }
    if (m.size > 0) {
      blocks.push_back({DiffBlock::Kind::kEqual, {m.i, m.i + m.size}, {m.j, m.j + m.size}});
    }
    i = m.i + m.size;
    j = m.j + m.size;
  }
  return blocks;
}

std::vector<DiffBlock> diff(const Tokens& a, const Tokens& b) {
  std::unordered_map<std::string, int> table;
  auto ia = intern(a, table);
  auto ib = intern(b, table);
  return diff_ids(ia, ib);
}

std::optional<ContextSpan> find_answer(const Tokens& target, const Tokens& context) {
  if (target.empty() || target.size() > context.size()) return std::nullopt;
  auto it = std::search(context.begin(), context.end(), target.begin(), target.end());
  if (it == context.end()) return std::nullopt;
  auto start = static_cast<std::size_t>(it - context.begin());
  return ContextSpan{start, start + target.size() - 1};
}

LabelResult derive_labels(const Example& example, const Tokens& context_tokens) {
  if (!example.rewrite) throw LabelError("example '" + example.id + "' has no rewrite");
  const Tokens& question = example.question;
  const Tokens& rewrite = *example.rewrite;

  LabeledExample out;
  out.example = example;
  out.tags.assign(question.size() + 1, Tag::kO);

  auto blocks = diff(question, rewrite);
  for (const auto& blk : blocks) {
    if (blk.kind == DiffBlock::Kind::kDelete) return Invalid{Invalid::Reason::kDeleteBlock};
  }

  auto set_tag = [&out](std::size_t slot, Tag tag) {
    if (out.tags[slot] != Tag::kO) throw LabelError("conflicting tags at slot " + std::to_string(slot));
    out.tags[slot] = tag;
  };

  for (const auto& blk : blocks) {
    if (blk.kind == DiffBlock::Kind::kEqual) continue;
    Tokens target(rewrite.begin() + static_cast<std::ptrdiff_t>(blk.b.begin),
                  rewrite.begin() + static_cast<std::ptrdiff_t>(blk.b.end));
    auto answer = find_answer(target, context_tokens);
    if (!answer) return Invalid{Invalid::Reason::kAnswerNotFound};

    QuestionSpan span;
    if (blk.kind == DiffBlock::Kind::kReplace) {
      span = {blk.a.begin + 1, blk.a.size(), Action::kReplace};
      set_tag(span.start, Tag::kBReplace);
      for (std::size_t s = span.start + 1; s < span.start + span.length; ++s) set_tag(s, Tag::kI);
    } else {
      // token before the insertion point; slot 0 (BOS) when inserting at the front
      span = {blk.a.begin, 1, Action::kInsert};
      set_tag(span.start, Tag::kBInsert);
    }
    out.queries.push_back({span, *answer});
  }
  return out;
}

LabelResult derive_labels(const Example& example) {
  return derive_labels(example, flatten_context(example));
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "of",     "and",   "in",   "to",     "as",     "for",    "on",     "with",      "by",
      "at",     "from",  "but",  "or",     "up",     "out",    "after",  "into",      "about",
      "over",   "then",  "some", "little", "just",   "than",   "around", "both",      "off",
      "until",  "any",   "including", "away", "the", "addition", "\xE2\x80\x99s", "?"};
  return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stop-word file " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

std::vector<Example> augment(const Example& example, const std::set<std::string>& stopwords) {
  Example variant = example;
  variant.question.clear();
  for (const auto& t : example.question) {
    if (!stopwords.contains(t.text)) variant.question.push_back(t);
  }
  if (variant.question.size() == example.question.size() || variant.question.empty()) return {};
  variant.id = example.id + "#aug";
  return {std::move(variant)};
}

std::string to_json_line(const LabeledExample& labeled, TokenMode mode) {
  nlohmann::json j;
  const auto& ex = labeled.example;
  j["id"] = ex.id;
  j["tags"] = nlohmann::json::array();
  for (Tag t : labeled.tags) j["tags"].push_back(std::string(to_string(t)));
  j["queries"] = nlohmann::json::array();
  for (const auto& q : labeled.queries) {
    j["queries"].push_back({{"q_start", q.question.start},
                            {"q_len", q.question.length},
                            {"action", std::string(to_string(q.question.action))},
                            {"ctx_start", q.answer.start},
                            {"ctx_end", q.answer.end}});
  }
  j["context"] = nlohmann::json::array();
  for (const auto& utt : ex.context) j["context"].push_back(join(utt, mode));
  j["question"] = join(ex.question, mode);
  if (ex.rewrite) j["rewrite"] = join(*ex.rewrite, mode);
  return j.dump();
}

LabeledExample parse_labeled_line(std::string_view line, std::size_t line_no, TokenMode mode) {
  LabeledExample out;
  out.example = parse_example(line, line_no, mode);
  auto j = nlohmann::json::parse(line);
  const std::size_t n = out.example.question.size();
  const std::size_t m = context_length(out.example);
  try {
    for (const auto& t : j.at("tags")) out.tags.push_back(parse_tag(t.get<std::string>()));
    for (const auto& q : j.at("queries")) {
      Query query;
      query.question = {q.at("q_start").get<std::size_t>(), q.at("q_len").get<std::size_t>(),
                        parse_action(q.at("action").get<std::string>())};
      query.answer = {q.at("ctx_start").get<std::size_t>(), q.at("ctx_end").get<std::size_t>()};
      if (query.question.start + query.question.length > n + 1 || query.question.length == 0)
        throw SchemaError(line_no, "query span out of question bounds");
      if (query.answer.start > query.answer.end || query.answer.end >= m)
        throw SchemaError(line_no, "answer span out of context bounds");
      out.queries.push_back(query);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(line_no, e.what());
  } catch (const LabelError& e) {
    throw SchemaError(line_no, e.what());
  }
  if (out.tags.size() != n + 1) throw SchemaError(line_no, "tag count must be question length + 1");
  return out;
}

std::vector<LabeledExample> load_labeled(const std::string& path, TokenMode mode) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<LabeledExample> out;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    if (buf.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    out.push_back(parse_labeled_line(buf, line, mode));
  }
  return out;
}

}  // namespace qrw
