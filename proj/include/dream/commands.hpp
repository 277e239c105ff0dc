#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dream/config.hpp"
#include "dream/diagnostics.hpp"
#include "dream/gradcheck.hpp"
#include "dream/pipeline.hpp"

namespace dream {

struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::vector<std::string> ablations;
};

/// Loads a config file and applies command-line overrides and ablations.
RunConfig resolve_config(const std::filesystem::path& path, const CommandOverrides& overrides = {});
void apply_overrides(RunConfig& config, const CommandOverrides& overrides);

PreparedData cmd_prepare(const RunConfig& config);

/// Trains into config.out_dir: config.json, best.{bin,json}, train_log.jsonl,
/// val.json, test.json, results.csv and the per-epoch diagnostics CSVs.
TrainResult cmd_train(const RunConfig& config);

/// Loads `checkpoint` (a stem) into a freshly built model and evaluates `split`.
EvalReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint, const std::string& split);

struct AblationRow {
  std::string name;  // "full" or the ablation flag
  EvalReport test;
};

/// Trains the full model and one model per flag with the shared seed; each
/// run lives in <out>/<name>/ and the table is written to <out>/ablation.csv.
std::vector<AblationRow> cmd_ablate(const RunConfig& config, const std::vector<std::string>& flags);

/// Diagnostics of a saved checkpoint, written as CSVs into config.out_dir.
DiagnosticsRow cmd_diagnose(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Finite-difference check of the configured model's full training loss on
/// one fixed batch.
GradCheckReport cmd_gradcheck(const RunConfig& config, std::size_t batch_size = 16, const GradCheckOptions& opts = {});

/// Writes behavior/modal/general user and item representations as CSV.
void cmd_export_embeddings(const RunConfig& config, const std::filesystem::path& checkpoint);

}  // namespace dream
