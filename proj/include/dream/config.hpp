#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dream/baselines.hpp"
#include "dream/ingest.hpp"
#include "dream/model.hpp"
#include "dream/train.hpp"

namespace dream {

struct DataConfig {
  std::filesystem::path interactions;
  std::map<Modality, std::filesystem::path> features;  // feature stems or .csv files
  std::size_t kcore = 5;
  SplitRatios split;
  std::uint64_t split_seed = 2024;
};

enum class ModelKind { Dream, LightGcn, Vbpr };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct RunConfig {
  DataConfig data;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path out_dir = "runs/default";
  std::uint64_t seed = 2024;
  ModelKind model = ModelKind::Dream;
  ModelConfig dream;
  /// Attach the alignment plug when the model is a baseline.
  bool bma_plug = false;
  LossWeights loss;
  TrainerConfig trainer;
  std::size_t drift_sample = 512;
  std::vector<std::string> ablations;  // applied in order by apply_ablation

  void validate() const;
  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected. Relative
/// data paths are resolved against `base_dir`; cache and output directories
/// stay relative to the working directory.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the resolved config as <dir>/config.json.
void echo_run_config(const RunConfig& config, const std::filesystem::path& dir);

/// Names accepted by apply_ablation, in the default ablation-table order.
const std::vector<std::string>& default_ablations();
bool is_ablation(const std::string& name);
/// Switches off the component named by `flag` (e.g. "no-filter-gate").
void apply_ablation(RunConfig& config, const std::string& flag);

}  // namespace dream
