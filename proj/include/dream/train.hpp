#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "dream/evaluate.hpp"
#include "dream/recommender.hpp"

namespace dream {

/// Training interactions with per-user sorted item lists for negative sampling.
class TrainIndex {
 public:
  TrainIndex(std::span<const Interaction> train, std::size_t num_users, std::size_t num_items);

  std::size_t num_users() const noexcept { return items_of_.size(); }
  std::size_t num_items() const noexcept { return num_items_; }
  std::span<const Interaction> interactions() const noexcept { return interactions_; }
  std::span<const std::uint32_t> items_of(std::size_t user) const { return items_of_[user]; }
  bool contains(std::size_t user, std::size_t item) const;

 private:
  std::size_t num_items_;
  std::vector<Interaction> interactions_;
  std::vector<std::vector<std::uint32_t>> items_of_;
};

/// B triples: (u, i) uniform over training interactions, i' uniform over the
/// items u has not interacted with (rejection sampling). Interactions of
/// users who have seen every item are redrawn a bounded number of times.
BatchTriples sample_batch(const TrainIndex& index, std::size_t batch_size, std::mt19937_64& rng);

struct TrainerConfig {
  std::size_t batch_size = 2048;
  AdamConfig adam;
  std::size_t max_epochs = 1000;
  std::size_t patience = 20;
  std::vector<std::size_t> eval_k{10, 20};
  std::size_t stop_k = 20;  // validation Recall@stop_k drives early stopping
  std::uint64_t seed = 2024;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // mean over the epoch's batches
  double val_recall = 0.0;
  bool improved = false;
  std::size_t best_epoch = 0;
  double best_val_recall = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_recall = 0.0;
  bool early_stopped = false;
  EvalReport val;   // best checkpoint
  EvalReport test;  // best checkpoint
};

using EpochCallback = std::function<void(const EpochRecord&, Recommender&)>;

struct TrainOptions {
  /// When set: best checkpoint at <out>/best.{bin,json}, per-epoch JSON lines
  /// at <out>/train_log.jsonl.
  std::optional<std::filesystem::path> out_dir;
  EpochCallback on_epoch;
};

/// Mini-batch Adam training with early stopping on validation recall. The
/// best parameters are restored before the final validation and test
/// reports. A non-finite loss or gradient aborts with NumericError; the
/// checkpoint on disk is the last good one.
TrainResult train(Recommender& model, const Splits& splits, std::size_t num_users, std::size_t num_items,
                  const TrainerConfig& config, const TrainOptions& options = {});

/// Evaluates a model's general representations on one split.
EvalReport evaluate_model(Recommender& model, std::span<const Interaction> split, std::span<const Interaction> train,
                          std::span<const std::size_t> ks, const std::string& name);

}  // namespace dream
