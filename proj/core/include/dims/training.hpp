#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dims/checkpoint.hpp"
#include "dims/config.hpp"
#include "dims/data.hpp"
#include "dims/metrics.hpp"
#include "dims/model.hpp"
#include "dims/optimizer.hpp"

namespace dims {

struct EvalOptions {
  std::size_t beam_size = 4;
  bool greedy = false;
  /// Recall cut-offs; values above the candidate count are skipped.
  std::vector<std::size_t> recall_ks = {1, 2, 5};
};

struct SampleEval {
  std::string id;
  std::vector<std::string> summary;
  std::vector<std::string> reference;
  std::size_t cover = 0;
  std::size_t positive = 0;
  std::vector<double> cover_scores;
  metrics::RougeScore rouge;
};

struct EvalResult {
  metrics::RougeScore rouge;  // component-wise mean over samples
  double map = 0;
  std::vector<std::pair<std::size_t, double>> recall;  // (k, R@k)
  std::size_t candidates = 0;
  std::vector<SampleEval> samples;
};

EvalResult evaluate(const DimsModel& model, const Vocabulary& vocab,
                    std::span<const Sample> samples, const EvalOptions& options = {});
/// Component-wise mean of several evaluations (all over the same samples).
EvalResult average_results(std::span<const EvalResult> results);

/// Training hit a non-finite loss or gradient.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& message, std::string diagnostics)
      : std::runtime_error(message), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based count of optimizer updates
  std::size_t epoch = 0;
  double seq_loss = 0;   // batch mean of the summed per-sample loss
  double pic_loss = 0;
  std::size_t target_tokens = 0;
  std::optional<double> val_rouge_l;
  std::optional<double> val_map;
};

struct TrainerOptions {
  /// Log, config and checkpoints go here; empty disables all file output.
  std::filesystem::path out_dir;
  std::function<void(const StepRecord&)> on_step;
  /// Stop after this many updates (0 = run all epochs).
  std::size_t max_steps = 0;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<std::filesystem::path> kept_checkpoints;  // best first
  std::size_t final_step = 0;
};

/// Mini-batch Adagrad on the joint loss. Batch order depends only on the
/// seed and epoch, so a run resumed from a checkpoint follows the same path.
class Trainer {
 public:
  Trainer(const RunConfig& config, Vocabulary vocab, std::vector<Sample> train,
          std::vector<Sample> validation, TrainerOptions options = {});

  /// Continues from a checkpoint taken by a trainer with the same data.
  void restore(LoadedCheckpoint checkpoint);

  StepRecord train_step();
  TrainResult run();
  std::optional<EvalResult> validate();

  DimsModel& model() { return *model_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Adagrad& optimizer() const { return optimizer_; }
  std::size_t step() const { return step_; }
  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const;
  void save(const std::filesystem::path& dir, const std::map<std::string, double>& metrics = {}) const;

 private:
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;
  void record(StepRecord& rec, TrainResult& result);
  void keep_if_best(double score, TrainResult& result);

  RunConfig config_;
  Vocabulary vocab_;
  std::vector<Sample> train_;
  std::vector<EncodedSample> train_ids_;
  std::vector<Sample> validation_;
  TrainerOptions options_;
  std::unique_ptr<DimsModel> model_;
  Adagrad optimizer_;
  std::size_t step_ = 0;
  std::vector<std::pair<double, std::filesystem::path>> best_;
};

}  // namespace dims
