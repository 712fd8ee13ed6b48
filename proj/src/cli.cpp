#include "qrw/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qrw/checkpoint.hpp"
#include "qrw/error.hpp"
#include "qrw/labeler.hpp"
#include "qrw/metrics.hpp"
#include "qrw/pipeline.hpp"
#include "qrw/run_config.hpp"
#include "qrw/trainer.hpp"

namespace qrw {

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string profile;
  std::string token_mode;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    if (seed) cfg.seed = *seed;
    if (!profile.empty()) cfg.profile = parse_profile(profile);
    if (!token_mode.empty()) cfg.token_mode = parse_token_mode(token_mode);
    cfg.sync();
    return cfg;
  }
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON run configuration");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--profile", f.profile, "deterministic or fast")
      ->check(CLI::IsMember({"deterministic", "fast"}));
  app->add_option("--token-mode", f.token_mode, "word or char")->check(CLI::IsMember({"word", "char"}));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["em"] = r.em;
  j["em_positive"] = r.em_positive;
  for (const auto& [n, v] : r.bleu) j["bleu"][std::to_string(n)] = v;
  for (const auto& [n, v] : r.sentence_bleu) j["sentence_bleu"][std::to_string(n)] = v;
  for (const auto& [k, v] : r.rouge) j["rouge"][k] = v;
  j["counts"] = {{"total", r.counts.total}, {"positive", r.counts.positive}, {"negative", r.counts.negative}};
  j["rouge_l_beta"] = 1.2;
  return j;
}

std::vector<TrainingInstance> to_instances(const std::vector<LabeledExample>& data, const Vocabulary& vocab) {
  std::vector<TrainingInstance> out;
  out.reserve(data.size());
  for (const auto& l : data) out.push_back(make_instance(l, vocab));
  return out;
}

// ---- prepare ---------------------------------------------------------------

struct PrepareArgs {
  std::string input, output, stopwords;
  bool augment = false;
};

int cmd_prepare(const RunConfig& cfg, const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  auto corpus = load_corpus(a.input, cfg.token_mode);
  std::set<std::string> stop = a.stopwords.empty() ? default_stopwords() : load_stopwords(a.stopwords);

  std::size_t valid = 0, augmented = 0, delete_block = 0, not_found = 0, no_rewrite = 0;
  auto file = open_out(a.output);
  auto emit = [&](const Example& ex, bool is_aug) {
    auto res = derive_labels(ex);
    if (auto* bad = std::get_if<Invalid>(&res)) {
      if (is_aug) return;
      (bad->reason == Invalid::Reason::kDeleteBlock ? delete_block : not_found)++;
      return;
    }
    file << to_json_line(std::get<LabeledExample>(res), cfg.token_mode) << '\n';
    (is_aug ? augmented : valid)++;
  };
  for (const auto& ex : corpus) {
    if (!ex.rewrite) {
      ++no_rewrite;
      err << "warning: line " << ex.line << " has no rewrite, skipped\n";
      continue;
    }
    emit(ex, false);
    if (a.augment)
      for (const auto& v : augment(ex, stop)) emit(v, true);
  }

  nlohmann::json stats{{"total", corpus.size()},
                       {"valid", valid},
                       {"invalid", {{"delete_block", delete_block}, {"answer_not_found", not_found}}},
                       {"missing_rewrite", no_rewrite},
                       {"augmented", augmented},
                       {"written", valid + augmented}};
  out << stats.dump() << '\n';
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data, checkpoint, history;
  std::optional<int> epochs, batch_size;
  std::optional<double> learning_rate;
  bool report_em = false;
};

int cmd_train(RunConfig cfg, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.epochs) cfg.optim.epochs = *a.epochs;
  if (a.batch_size) cfg.optim.batch_size = *a.batch_size;
  if (a.learning_rate) cfg.optim.learning_rate = *a.learning_rate;

  auto data = load_labeled(a.data, cfg.token_mode);
  std::vector<Example> examples;
  for (const auto& l : data) examples.push_back(l.example);
  auto vocab = Vocabulary::build(examples);
  cfg.encoder.vocab = static_cast<int>(vocab.size());
  auto instances = to_instances(data, vocab);
  auto init = ModelParams::initialize(cfg.encoder);
  const double initial = batch_loss(init, instances, cfg.loss, nullptr, cfg.profile).total;

  TrainResult result;
  try {
    result = train(instances, std::move(init), cfg.optim, cfg.loss);
  } catch (const DivergenceError& e) {
    const std::string rescue = a.checkpoint + ".last_good";
    save_checkpoint(rescue, e.last_good(), vocab);
    err << "error: " << e.what() << "; last good checkpoint written to " << rescue << '\n';
    return kExitDivergence;
  }
  save_checkpoint(a.checkpoint, result.params, vocab);
  if (!a.history.empty()) write_history_csv(a.history, result.history);

  nlohmann::json summary{{"examples", instances.size()},
                         {"steps", result.history.size()},
                         {"initial_loss", initial},
                         {"final_loss", batch_loss(result.params, instances, cfg.loss, nullptr, cfg.profile).total},
                         {"checkpoint", a.checkpoint}};
  if (a.report_em) {
    std::size_t hits = 0;
    for (const auto& l : data) {
      auto p = predict(result.params, vocab, l.example, {cfg.max_answer_len});
      hits += l.example.rewrite && p.tokens == *l.example.rewrite;
    }
    summary["train_em"] = data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

// ---- rewrite ---------------------------------------------------------------

struct RewriteArgs {
  std::string checkpoint, input, output;
  bool oracle = false;
  std::optional<std::size_t> max_answer_len;
};

int cmd_rewrite(RunConfig cfg, const RewriteArgs& a, std::ostream& out, std::ostream& err) {
  if (a.max_answer_len) cfg.max_answer_len = *a.max_answer_len;
  if (!a.oracle && a.checkpoint.empty()) throw CLI::ValidationError("--checkpoint", "required unless --oracle-edits");
  auto corpus = load_corpus(a.input, cfg.token_mode);

  std::optional<Checkpoint> ck;
  if (!a.oracle) ck = load_checkpoint(a.checkpoint);
  const PredictOptions opts{cfg.max_answer_len};

  std::vector<Prediction> preds(corpus.size());
  auto run_one = [&](std::size_t i) {
    preds[i] = a.oracle ? predict_oracle(corpus[i]) : predict(ck->params, ck->vocab, corpus[i], opts);
  };
  std::size_t workers = 1;
  if (cfg.profile == Profile::kFast)
    workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(corpus.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < corpus.size(); i += workers) run_one(i);
      });
    for (auto& t : pool) t.join();
  }

  auto file = open_out(a.output);
  std::size_t errors = 0, edited = 0;
  for (const auto& p : preds) {
    file << to_json_line(p, cfg.token_mode) << '\n';
    for (const auto& w : p.warnings) err << "warning: " << p.id << ": " << w << '\n';
    if (p.error) {
      ++errors;
      err << "warning: " << p.id << " emitted as a copy: " << p.message << '\n';
    }
    edited += !p.plan.edits.empty();
  }
  out << nlohmann::json{{"examples", preds.size()}, {"edited", edited}, {"errors", errors}}.dump() << '\n';
  return kExitOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions, gold, output;
  bool split = false;
};

int cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  auto gold = load_corpus(a.gold, cfg.token_mode);
  std::ifstream in(a.predictions);
  if (!in) throw Error("cannot open " + a.predictions);

  std::vector<Sentence> preds, refs, questions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!j.contains("prediction") || !j["prediction"].is_string())
      throw SchemaError(line_no, "missing string field 'prediction'");
    const std::size_t i = preds.size();
    if (i >= gold.size()) throw Error("more predictions than gold examples");
    if (j.contains("id") && j["id"].is_string() && j["id"].get<std::string>() != gold[i].id)
      throw SchemaError(line_no, "prediction id does not match gold id '" + gold[i].id + "'");
    Tokens toks;
    try {
      toks = tokenize(j["prediction"].get<std::string>(), cfg.token_mode);
    } catch (const EmptyText&) {
    }
    preds.push_back(texts(toks));
  }
  if (preds.size() != gold.size())
    throw Error("prediction count " + std::to_string(preds.size()) + " differs from gold count " +
                std::to_string(gold.size()));
  for (const auto& g : gold) {
    if (!g.rewrite) throw SchemaError(g.line, "gold example has no rewrite");
    refs.push_back(texts(*g.rewrite));
    questions.push_back(texts(g.question));
  }

  auto overall = evaluate(preds, refs, questions);
  nlohmann::json report{{"overall", report_json(overall)}};
  out << format_table(overall, "overall");
  if (a.split) {
    auto split = split_report(preds, refs, questions);
    report["positive"] = report_json(split.positive);
    report["negative"] = report_json(split.negative);
    out << format_table(split.positive, "positive") << format_table(split.negative, "negative");
  }
  if (!a.output.empty()) open_out(a.output) << report.dump(2) << '\n';
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

struct GradCheckArgs {
  std::string data;
  double tolerance = 1e-4;
  std::size_t probes = 100;
  std::optional<int> d, layers;
};

int cmd_gradcheck(RunConfig cfg, const GradCheckArgs& a, std::ostream& out, std::ostream& err) {
  cfg.encoder.d = a.d.value_or(8);
  cfg.encoder.layers = a.layers.value_or(1);
  auto data = load_labeled(a.data, cfg.token_mode);
  if (data.empty()) throw Error("no labelled examples in " + a.data);
  std::vector<Example> examples;
  for (const auto& l : data) examples.push_back(l.example);
  auto vocab = Vocabulary::build(examples);
  cfg.encoder.vocab = static_cast<int>(vocab.size());
  auto params = ModelParams::initialize(cfg.encoder);

  // prefer an example that exercises the span heads
  const LabeledExample* pick = &data.front();
  for (const auto& l : data)
    if (!l.queries.empty()) {
      pick = &l;
      break;
    }
  auto report = grad_check(params, make_instance(*pick, vocab), cfg.loss, a.tolerance, a.probes, cfg.seed);
  out << nlohmann::json{{"example", pick->example.id},
                        {"probes", report.probes},
                        {"max_rel_error", report.max_rel_error},
                        {"worst_tensor", report.worst_tensor},
                        {"tolerance", report.tolerance},
                        {"passed", report.passed}}
             .dump()
      << '\n';
  if (!report.passed) err << "gradient check failed\n";
  return report.passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Action-based conversational question rewriting", "qrw"};
  app.require_subcommand(1);

  CommonFlags common;

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Derive action labels from a raw corpus");
  add_common(prepare, common);
  prepare->add_option("--input", prep.input, "Raw JSONL corpus")->required();
  prepare->add_option("--output", prep.output, "Labelled JSONL output")->required();
  prepare->add_flag("--augment", prep.augment, "Add stop-word-deletion variants");
  prepare->add_option("--stopwords", prep.stopwords, "Stop-word list, one per line");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the encoder and both heads");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", tr.data, "Labelled JSONL")->required();
  train_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--history", tr.history, "CSV loss history to write");
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--learning-rate", tr.learning_rate);
  train_cmd->add_flag("--report-train-em", tr.report_em, "Rewrite the training set and report EM");

  RewriteArgs rw;
  auto* rewrite = app.add_subcommand("rewrite", "Rewrite questions with a trained model");
  add_common(rewrite, common);
  rewrite->add_option("--checkpoint", rw.checkpoint, "Trained checkpoint");
  rewrite->add_option("--input", rw.input, "Raw JSONL corpus")->required();
  rewrite->add_option("--output", rw.output, "Predictions JSONL")->required();
  rewrite->add_flag("--oracle-edits", rw.oracle, "Apply edits derived from the gold rewrite");
  rewrite->add_option("--max-answer-len", rw.max_answer_len, "Longest answer span (tokens)")
      ->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against gold rewrites");
  add_common(evaluate_cmd, common);
  evaluate_cmd->add_option("--predictions", ev.predictions, "Predictions JSONL")->required();
  evaluate_cmd->add_option("--gold", ev.gold, "Raw JSONL corpus with rewrites")->required();
  evaluate_cmd->add_option("--output", ev.output, "JSON report to write");
  evaluate_cmd->add_flag("--split-pos-neg", ev.split, "Also report positive / negative subsets");

  GradCheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  add_common(gradcheck, common);
  gradcheck->add_option("--data", gc.data, "Labelled JSONL")->required();
  gradcheck->add_option("--tolerance", gc.tolerance);
  gradcheck->add_option("--probes", gc.probes);
  gradcheck->add_option("--d", gc.d, "Hidden width (default 8)");
  gradcheck->add_option("--layers", gc.layers, "Encoder layers (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    RunConfig cfg = common.resolve();
    if (prepare->parsed()) return cmd_prepare(cfg, prep, out, err);
    if (train_cmd->parsed()) return cmd_train(cfg, tr, out, err);
    if (rewrite->parsed()) return cmd_rewrite(cfg, rw, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, ev, out, err);
    if (gradcheck->parsed()) return cmd_gradcheck(cfg, gc, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace qrw
