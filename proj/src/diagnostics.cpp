#include "dream/diagnostics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "dream/params.hpp"

namespace dream {

namespace {

Matrix sample_cosines(const Matrix& rows) {
  const Matrix n = normalize_rows(rows);
  return matmul_nt(n, n);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  return out;
}

}  // namespace

double modal_drift(const Tensor2D& learned, const Matrix& raw, std::span<const std::size_t> sample) {
  if (sample.size() < 2) throw ConfigError("modal_drift: sample needs at least two rows");
  if (learned.rows() != raw.rows()) {
    throw DimensionError(fmt::format("modal_drift: {} learned rows vs {} raw rows", learned.rows(), raw.rows()));
  }
  const Matrix a = sample_cosines(select_rows(Matrix::cast(learned), sample));
  const Matrix b = sample_cosines(select_rows(raw, sample));
  const std::size_t s = sample.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (i != j) sum += std::abs(a(i, j) - b(i, j));
    }
  }
  return sum / static_cast<double>(s * (s - 1));
}

double dual_cosine(const Tensor2D& behavior, const Tensor2D& modal) {
  if (!behavior.same_shape(modal)) {
    throw DimensionError(fmt::format("dual_cosine: {}x{} vs {}x{}", behavior.rows(), behavior.cols(), modal.rows(),
                                     modal.cols()));
  }
  if (behavior.rows() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < behavior.rows(); ++r) {
    const double nb = norm(behavior.row(r));
    const double nm = norm(modal.row(r));
    if (nb > 0.0 && nm > 0.0) sum += dot(behavior.row(r), modal.row(r)) / (nb * nm);
  }
  return sum / static_cast<double>(behavior.rows());
}

std::vector<std::size_t> drift_sample(std::size_t rows, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  if (size < rows) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

const char* to_string(Line line) {
  switch (line) {
    case Line::Behavior: return "behavior";
    case Line::Modal: return "modal";
    case Line::General: return "general";
  }
  return "?";
}

EvalReport evaluate_line(const DualRepresentations& reps, Line line, std::span<const Interaction> split,
                         std::span<const Interaction> train, std::span<const std::size_t> ks) {
  const Tensor2D* u = &reps.general_user;
  const Tensor2D* i = &reps.general_item;
  if (line == Line::Behavior) {
    u = &reps.behavior_user;
    i = &reps.behavior_item;
  } else if (line == Line::Modal) {
    u = &reps.modal_user;
    i = &reps.modal_item;
  }
  EvalReport r = evaluate(*u, *i, split, train, ks, true);
  r.split = to_string(line);
  return r;
}

DiagnosticsRow diagnose(Recommender& model, std::size_t epoch, std::span<const std::size_t> drift_rows,
                        std::span<const Interaction> split, std::span<const Interaction> train,
                        std::span<const std::size_t> ks) {
  const DualRepresentations reps = model.represent();
  DiagnosticsRow row;
  row.epoch = epoch;
  if (!model.fused_raw_items().empty() && reps.modal_item.rows() == model.fused_raw_items().rows()) {
    row.drift = modal_drift(reps.modal_item, model.fused_raw_items(), drift_rows);
  }
  if (reps.modal_user.same_shape(reps.behavior_user) && reps.modal_item.same_shape(reps.behavior_item)) {
    row.cosine_users = dual_cosine(reps.behavior_user, reps.modal_user);
    row.cosine_items = dual_cosine(reps.behavior_item, reps.modal_item);
    const double nu = static_cast<double>(reps.behavior_user.rows());
    const double ni = static_cast<double>(reps.behavior_item.rows());
    row.cosine_pooled = (row.cosine_users * nu + row.cosine_items * ni) / (nu + ni);
  }
  for (Line line : {Line::Behavior, Line::Modal, Line::General}) {
    if (line != Line::General && reps.modal_user.empty()) continue;
    EvalReport r = evaluate_line(reps, line, split, train, ks);
    r.epoch = epoch;
    row.lines.push_back(std::move(r));
  }
  return row;
}

void write_diagnostics(const std::filesystem::path& dir, std::span<const DiagnosticsRow> rows) {
  std::filesystem::create_directories(dir);
  auto drift = open_csv(dir / "drift.csv");
  drift << "epoch,value\n";
  for (const auto& r : rows) drift << fmt::format("{},{:.8f}\n", r.epoch, r.drift);

  auto align = open_csv(dir / "alignment.csv");
  align << "epoch,value,line\n";
  for (const auto& r : rows) {
    align << fmt::format("{},{:.8f},users\n", r.epoch, r.cosine_users);
    align << fmt::format("{},{:.8f},items\n", r.epoch, r.cosine_items);
    align << fmt::format("{},{:.8f},pooled\n", r.epoch, r.cosine_pooled);
  }

  auto lines = open_csv(dir / "line_eval.csv");
  lines << "epoch,value,line,K,metric\n";
  for (const auto& r : rows) {
    for (const auto& e : r.lines) {
      for (const auto& [k, v] : e.recall) lines << fmt::format("{},{:.8f},{},{},recall\n", r.epoch, v, e.split, k);
      for (const auto& [k, v] : e.ndcg) lines << fmt::format("{},{:.8f},{},{},ndcg\n", r.epoch, v, e.split, k);
    }
  }
}

}  // namespace dream
