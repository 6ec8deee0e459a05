#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qrnn/config.hpp"
#include "qrnn/model.hpp"

namespace qrnn {

// Raised when optimization cannot continue (non-finite gradients or losses).
// Callers map it to the runtime-failure exit path, never to a silent clamp.
struct TrainingHalt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-10;
  double weight_decay = 1e-4;
  bool decoupled = false;  // default couples decay into the gradient
  double grad_clip = 0.0;  // global-norm clip, 0 disables

  static AdamConfig from_run(const RunConfig& cfg);
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ParamStore& store, AdamConfig cfg);

  // grads is aligned with store.entries(). Throws TrainingHalt when a
  // gradient entry is NaN or infinite, naming the parameter.
  void step(ParamStore& store, const std::vector<std::vector<double>>& grads);

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::int64_t step_count() const { return step_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
               std::int64_t step);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
};

// Store-aligned gradient buffers summed over a batch of per-sample tapes.
class GradAccumulator {
 public:
  explicit GradAccumulator(const ParamStore& store);
  void zero();
  void add_from_tape(const Tape& tape, const ParamStore& store);
  void add(const GradAccumulator& other);
  void scale(double factor);
  const std::vector<std::vector<double>>& grads() const { return g_; }

 private:
  std::vector<std::vector<double>> g_;
};

// One view over all four task datasets; members a task does not use stay
// empty (copy derives its own targets, parity carries labels).
struct TaskData {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

struct EpochStats {
  double loss = 0.0;
  double metric = 0.0;  // accuracy, or perplexity for lm
  double seconds = 0.0;
};

struct TrainOutcome {
  std::vector<EpochStats> train_history, test_history;
  int epochs_run = 0;
  bool early_stopped = false;
};

// Forward pass for sample i of the task's dataset.
RunResult run_sample(const QrnnModel& model, Tape& tape, const TaskData& data, std::size_t i,
                     bool training, std::uint64_t dropout_seed);

// Dropout-free forward over the whole set; deterministic per call.
EpochStats evaluate(const QrnnModel& model, const TaskData& data);

// One pass of shuffled minibatch updates. Per-sample dropout streams are
// keyed by (seed, epoch, sample index) so batching never shifts them.
EpochStats train_epoch(QrnnModel& model, AdamOptimizer& opt, const TaskData& data,
                       const RunConfig& cfg, int epoch);

// Full loop with per-epoch eval, optional metrics CSV (epoch, split, loss,
// metric, seconds) and early stopping on the test split when the configured
// thresholds are all met. on_epoch (when set) observes each epoch's stats,
// for progress reporting; it must not mutate the model.
using EpochObserver = std::function<void(int epoch, const EpochStats& train_stats,
                                         const EpochStats& test_stats)>;
TrainOutcome train_model(QrnnModel& model, AdamOptimizer& opt, const TaskData& train,
                         const TaskData& test, const RunConfig& cfg,
                         const std::string& metrics_csv, const EpochObserver& on_epoch = {});

// Checkpoint container: named float64/int64/byte sections, exactly what was
// on disk. Section names: "config" (bytes), "param/<name>", "adam/m/<name>",
// "adam/v/<name>" (f64 tensors), "adam/step" (i64).
struct CheckpointSection {
  std::string name;
  int dtype = 0;  // 0 = f64, 1 = i64, 2 = bytes
  std::vector<int> dims;
  std::vector<double> f64;
  std::vector<std::int64_t> i64;
  std::string bytes;
};

struct Checkpoint {
  std::string config_text;
  std::vector<CheckpointSection> sections;

  const CheckpointSection* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParamStore& store,
                     const AdamOptimizer* opt);
Checkpoint load_checkpoint(const std::string& path);

// Copies parameter (and optimizer, when given) sections into live objects.
// Shape or name mismatches throw naming the offending tensor.
void restore_from_checkpoint(const Checkpoint& ck, QrnnModel& model, AdamOptimizer* opt);

}  // namespace qrnn
