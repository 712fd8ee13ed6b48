#include "qrw/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <thread>

namespace qrw {

namespace {

double neg_log(double p) { return -std::log(std::max(p, kLogFloor)); }

// Adam moments, one pair per tensor.
class Adam {
 public:
  Adam(const ModelParams& params, const OptimConfig& cfg)
      : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

  void step(ModelParams& params, const ModelParams& grad, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto p = params.tensors();
    auto g = grad.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      *m[i].tensor = cfg_.beta1 * *m[i].tensor + (1.0 - cfg_.beta1) * *g[i].tensor;
      *v[i].tensor = cfg_.beta2 * *v[i].tensor + (1.0 - cfg_.beta2) * g[i].tensor->cwiseAbs2();
      p[i].tensor->array() -=
          lr * (m[i].tensor->array() / bc1) / ((v[i].tensor->array() / bc2).sqrt() + cfg_.epsilon);
    }
  }

 private:
  OptimConfig cfg_;
  ModelParams m_;
  ModelParams v_;
  std::size_t t_ = 0;
};

}  // namespace

void LossConfig::validate() const {
  if (alpha1 < 0 || alpha2 < 0 || (alpha1 == 0 && alpha2 == 0))
    throw Error("loss weights must be non-negative and not both zero");
}

Profile parse_profile(std::string_view name) {
  if (name == "deterministic") return Profile::kDeterministic;
  if (name == "fast") return Profile::kFast;
  throw Error("unknown profile '" + std::string(name) + "'");
}

std::string_view to_string(Profile profile) {
  return profile == Profile::kDeterministic ? "deterministic" : "fast";
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0)) throw Error("learning rate must be positive");
  if (warmup_ratio < 0 || warmup_ratio > 1) throw Error("warmup_ratio must lie in [0, 1]");
  if (batch_size <= 0) throw Error("batch size must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
}

double seq_loss(std::span<const TagDistribution> dists, std::span<const std::vector<Tag>> gold) {
  if (dists.size() != gold.size()) throw ShapeError("seq_loss: example counts differ");
  if (dists.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (dists[i].size() != gold[i].size()) throw ShapeError("seq_loss: token counts differ");
    for (std::size_t k = 0; k < gold[i].size(); ++k) {
      auto g = static_cast<std::size_t>(gold[i][k]);
      if (g >= kNumTags) throw LabelError("gold tag outside the alphabet");
      total += neg_log(dists[i][k][g]);
    }
  }
  return total / static_cast<double>(dists.size());
}

double span_loss(std::span<const std::vector<SpanDistribution>> dists,
                 std::span<const std::vector<ContextSpan>> gold) {
  if (dists.size() != gold.size()) throw ShapeError("span_loss: example counts differ");
  if (dists.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (dists[i].size() != gold[i].size()) throw ShapeError("span_loss: query counts differ");
    for (std::size_t c = 0; c < gold[i].size(); ++c) {
      const auto& d = dists[i][c];
      const auto& y = gold[i][c];
      if (y.end >= d.end.size() || y.start >= d.start.size())
        throw LabelError("gold span index outside the context");
      total += neg_log(d.start[y.start]) + neg_log(d.end[y.end]);
    }
  }
  return total / static_cast<double>(dists.size());
}

double joint_loss(double seq, double span, const LossConfig& cfg) {
  return cfg.alpha1 * seq + cfg.alpha2 * span;
}

TrainingInstance make_instance(const LabeledExample& labeled, const Vocabulary& vocab) {
  Example ex = labeled.example;
  vocab.bind(ex);
  TrainingInstance inst;
  inst.id = ex.id;
  inst.seq = assemble(ex);
  inst.tags = labeled.tags;
  inst.queries = labeled.queries;
  if (inst.tags.size() != ex.question.size() + 1)
    throw ShapeError("example '" + ex.id + "': tag count must be question length + 1");
  return inst;
}

LossBreakdown example_loss(const ModelParams& params, const TrainingInstance& inst,
                           const LossConfig& cfg, ModelParams* grad, double scale) {
  auto trace = encode_traced(params, inst.seq);
  auto out = trace.slice();

  const double seq_norm =
      cfg.normalize_inner ? 1.0 / static_cast<double>(std::max<std::size_t>(inst.tags.size(), 1)) : 1.0;
  const double span_norm =
      cfg.normalize_inner && !inst.queries.empty() ? 1.0 / static_cast<double>(inst.queries.size()) : 1.0;

  LossBreakdown loss;
  if (!grad) {
    auto dist = tag_probs(params, out.question);
    for (std::size_t k = 0; k < inst.tags.size(); ++k)
      loss.seq += neg_log(dist[k][static_cast<std::size_t>(inst.tags[k])]);
    for (std::size_t c = 0; c < inst.queries.size(); ++c) {
      const auto& q = inst.queries[c];
      auto d = span_probs(params, out.context, out.question.row(static_cast<Eigen::Index>(q.question.start)), c);
      loss.span += neg_log(d.start[q.answer.start]) + neg_log(d.end[q.answer.end]);
    }
  } else {
    EncoderOutput upstream;
    const double seq_scale = scale * cfg.alpha1 * seq_norm;
    const double span_scale = scale * cfg.alpha2 * span_norm;
    loss.seq = detect_loss_backward(params, out.question, inst.tags, seq_scale, *grad, upstream.question);
    upstream.context = Matrix::Zero(out.context.rows(), out.context.cols());
    for (const auto& q : inst.queries) {
      const auto row = static_cast<Eigen::Index>(q.question.start);
      RowVector dquery = RowVector::Zero(out.question.cols());
      loss.span += span_loss_backward(params, out.context, out.question.row(row), q.answer, span_scale,
                                      *grad, upstream.context, dquery);
      upstream.question.row(row) += dquery;
    }
    encoder_backward(params, trace, upstream, *grad);
  }
  loss.seq *= seq_norm;
  loss.span *= span_norm;
  loss.total = joint_loss(loss.seq, loss.span, cfg);
  return loss;
}

LossBreakdown batch_loss(const ModelParams& params, std::span<const TrainingInstance> batch,
                         const LossConfig& cfg, ModelParams* grad, Profile profile) {
  LossBreakdown sum;
  if (batch.empty()) return sum;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::size_t workers = 1;
  if (profile == Profile::kFast) {
    workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, batch.size());
  }

  if (workers == 1) {
    for (const auto& inst : batch) {
      auto l = example_loss(params, inst, cfg, grad, inv_n);
      sum.seq += l.seq;
      sum.span += l.span;
    }
  } else {
    // Contiguous chunks, reduced in chunk order.
    std::vector<LossBreakdown> partial(workers);
    std::vector<ModelParams> partial_grad;
    if (grad) partial_grad.assign(workers, params.zeros_like());
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const std::size_t lo = w * chunk, hi = std::min(batch.size(), lo + chunk);
        try {
          for (std::size_t i = lo; i < hi; ++i) {
            auto l = example_loss(params, batch[i], cfg, grad ? &partial_grad[w] : nullptr, inv_n);
            partial[w].seq += l.seq;
            partial[w].span += l.span;
          }
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
    for (std::size_t w = 0; w < workers; ++w) {
      sum.seq += partial[w].seq;
      sum.span += partial[w].span;
      if (grad) grad->add_scaled(partial_grad[w], 1.0);
    }
  }
  sum.seq *= inv_n;
  sum.span *= inv_n;
  sum.total = joint_loss(sum.seq, sum.span, cfg);
  return sum;
}

double learning_rate_at(const OptimConfig& cfg, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(std::llround(cfg.warmup_ratio * static_cast<double>(total_steps)));
  if (warmup > 0 && step <= warmup)
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  return cfg.learning_rate;
}

TrainResult train(std::span<const TrainingInstance> corpus, ModelParams init,
                  const OptimConfig& cfg, const LossConfig& loss_cfg, const StepCallback& on_step) {
  cfg.validate();
  loss_cfg.validate();
  if (corpus.empty()) throw Error("training corpus is empty");

  TrainResult result{std::move(init), {}};
  const std::size_t n = corpus.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);

  Adam adam(result.params, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingInstance> batch_buf;

  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t lo = 0; lo < n; lo += batch) {
      ++step;
      batch_buf.clear();
      for (std::size_t i = lo; i < std::min(n, lo + batch); ++i) batch_buf.push_back(corpus[order[i]]);

      ModelParams grad = result.params.zeros_like();
      LossBreakdown loss;
      try {
        loss = batch_loss(result.params, batch_buf, loss_cfg, &grad, cfg.profile);
      } catch (const NumericError&) {
        throw DivergenceError(step, result.params);
      }
      if (!std::isfinite(loss.total) || !grad.all_finite())
        throw DivergenceError(step, result.params);

      adam.step(result.params, grad, learning_rate_at(cfg, step, total_steps));
      StepRecord rec{step, loss.seq, loss.span, loss.total};
      result.history.push_back(rec);
      if (on_step) on_step(rec);
    }
  }
  return result;
}

void write_history_csv(const std::string& path, std::span<const StepRecord> history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "step,l_seq,l_span,l_total\n";
  out << std::setprecision(17);
  for (const auto& r : history) out << r.step << ',' << r.seq << ',' << r.span << ',' << r.total << '\n';
}

GradCheckReport grad_check(const ModelParams& params, const TrainingInstance& inst,
                           const LossConfig& cfg, double tolerance, std::size_t probes,
                           std::uint64_t seed, double step) {
  ModelParams grad = params.zeros_like();
  const double base = example_loss(params, inst, cfg, &grad).total;
  // below this magnitude the comparison is absolute
  const double floor = 1e-6 * std::max(1.0, std::abs(base));

  ModelParams probe = params;
  auto tensors = probe.tensors();
  auto grads = grad.tensors();
  std::mt19937_64 rng(seed);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < probes; ++i) {
    // round-robin so every tensor is visited
    const std::size_t ti = i % tensors.size();
    Matrix& t = *tensors[ti].tensor;
    std::uniform_int_distribution<Eigen::Index> pick(0, t.size() - 1);
    const Eigen::Index flat = pick(rng);
    const Eigen::Index r = flat / t.cols(), c = flat % t.cols();

    const double saved = t(r, c);
    t(r, c) = saved + step;
    const double up = example_loss(probe, inst, cfg).total;
    t(r, c) = saved - step;
    const double down = example_loss(probe, inst, cfg).total;
    t(r, c) = saved;

    const double numeric = (up - down) / (2 * step);
    const double analytic = (*grads[ti].tensor)(r, c);
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    if (report.probes == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_tensor = tensors[ti].name;
    }
    ++report.probes;
  }
  report.passed = tolerance > 0 && report.max_rel_error <= tolerance;
  return report;
}

}  // namespace qrw
