#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qrw/comprehend.hpp"
#include "qrw/detect.hpp"
#include "qrw/encoder.hpp"
#include "qrw/error.hpp"
#include "qrw/labeler.hpp"

namespace qrw {

inline constexpr double kLogFloor = 1e-12;  // every -log is taken of max(p, kLogFloor)

struct LossConfig {
  double alpha1 = 5.0;  // sequence labelling weight
  double alpha2 = 3.0;  // span weight
  // Divide each example's inner sums by its slot / query count. Off by default.
  bool normalize_inner = false;

  void validate() const;
};

enum class Profile { kDeterministic, kFast };

Profile parse_profile(std::string_view name);
std::string_view to_string(Profile profile);

struct OptimConfig {
  double learning_rate = 1e-3;
  double warmup_ratio = 0.1;
  int batch_size = 24;
  int epochs = 3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 13;
  Profile profile = Profile::kDeterministic;

  void validate() const;
};

// Mean over examples of the per-example sum of -log p[gold tag].
double seq_loss(std::span<const TagDistribution> dists, std::span<const std::vector<Tag>> gold);

// Mean over examples of sum over queries of -log p_start - log p_end.
double span_loss(std::span<const std::vector<SpanDistribution>> dists,
                 std::span<const std::vector<ContextSpan>> gold);

double joint_loss(double seq, double span, const LossConfig& cfg);

// One labelled example bound to a vocabulary, ready for the encoder.
struct TrainingInstance {
  std::string id;
  JointSequence seq;
  std::vector<Tag> tags;      // n + 1
  std::vector<Query> queries;  // gold spans
};

TrainingInstance make_instance(const LabeledExample& labeled, const Vocabulary& vocab);

struct LossBreakdown {
  double seq = 0;
  double span = 0;
  double total = 0;
};

// Loss of one example; when `grad` is non-null adds scale * d(loss)/d(params).
LossBreakdown example_loss(const ModelParams& params, const TrainingInstance& inst,
                           const LossConfig& cfg, ModelParams* grad = nullptr, double scale = 1.0);

// Mean loss over `batch` (the 1/N of both loss terms) and, optionally, its
// gradient. Fast profile spreads examples over threads; the reduction order
// is fixed either way.
LossBreakdown batch_loss(const ModelParams& params, std::span<const TrainingInstance> batch,
                         const LossConfig& cfg, ModelParams* grad = nullptr,
                         Profile profile = Profile::kDeterministic);

struct StepRecord {
  std::size_t step = 0;
  double seq = 0;
  double span = 0;
  double total = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<StepRecord> history;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, ModelParams last_good)
      : Error("loss diverged at step " + std::to_string(step)),
        step_(step),
        last_good_(std::make_shared<ModelParams>(std::move(last_good))) {}
  std::size_t step() const { return step_; }
  const ModelParams& last_good() const { return *last_good_; }

 private:
  std::size_t step_;
  std::shared_ptr<ModelParams> last_good_;
};

// Linear warm-up over warmup_ratio of all steps, then constant.
double learning_rate_at(const OptimConfig& cfg, std::size_t step, std::size_t total_steps);

using StepCallback = std::function<void(const StepRecord&)>;

// Mini-batch Adam starting from `init`. Throws DivergenceError on a
// non-finite loss or activation.
TrainResult train(std::span<const TrainingInstance> corpus, ModelParams init,
                  const OptimConfig& cfg, const LossConfig& loss_cfg,
                  const StepCallback& on_step = {});

void write_history_csv(const std::string& path, std::span<const StepRecord> history);

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t probes = 0;
  std::string worst_tensor;
  double tolerance = 0;
  bool passed = false;
};

// Central differences of the joint loss on one example against the analytic
// gradient, for `probes` parameters spread over every tensor. Relative error
// is |a - f| / max(|a|, |f|, 1e-6 * max(1, |loss|)).
GradCheckReport grad_check(const ModelParams& params, const TrainingInstance& inst,
                           const LossConfig& cfg, double tolerance = 1e-4,
                           std::size_t probes = 100, std::uint64_t seed = 7, double step = 1e-5);

}  // namespace qrw
