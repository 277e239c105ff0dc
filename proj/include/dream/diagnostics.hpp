#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dream/evaluate.hpp"
#include "dream/recommender.hpp"

namespace dream {

/// Mean absolute difference between the off-diagonal entries of the s x s
/// cosine-similarity matrices of `learned` and `raw` over the sampled rows.
double modal_drift(const Tensor2D& learned, const Matrix& raw, std::span<const std::size_t> sample);

/// Mean over rows of cos(behavior_r, modal_r); rows with a zero vector count as 0.
double dual_cosine(const Tensor2D& behavior, const Tensor2D& modal);

/// Fixed seeded subset of min(size, count) row indices, sorted.
std::vector<std::size_t> drift_sample(std::size_t rows, std::size_t size, std::uint64_t seed);

enum class Line { Behavior, Modal, General };
const char* to_string(Line line);

EvalReport evaluate_line(const DualRepresentations& reps, Line line, std::span<const Interaction> split,
                         std::span<const Interaction> train, std::span<const std::size_t> ks);

struct DiagnosticsRow {
  std::size_t epoch = 0;
  double drift = 0.0;
  double cosine_users = 0.0;
  double cosine_items = 0.0;
  double cosine_pooled = 0.0;
  std::vector<EvalReport> lines;  // Behavior, Modal, General
};

/// Computes all signals for one model state.
DiagnosticsRow diagnose(Recommender& model, std::size_t epoch, std::span<const std::size_t> drift_rows,
                        std::span<const Interaction> split, std::span<const Interaction> train,
                        std::span<const std::size_t> ks);

/// Writes drift.csv, alignment.csv and line_eval.csv into `dir`.
void write_diagnostics(const std::filesystem::path& dir, std::span<const DiagnosticsRow> rows);

}  // namespace dream
