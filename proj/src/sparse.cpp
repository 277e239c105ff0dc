#include "dream/sparse.hpp"

#include <fmt/format.h>

#include "dream/binary_io.hpp"

namespace dream {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_entries(std::size_t rows, std::size_t cols,
                                        std::vector<SparseEntry> entries) {
  SparseMatrix m(rows, cols);
  std::sort(entries.begin(), entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    if (e.row >= rows || e.col >= cols) {
      throw DimensionError(fmt::format("sparse entry ({}, {}) outside {}x{}", e.row, e.col, rows, cols));
    }
    if (!std::isfinite(e.weight)) {
      throw NumericError(fmt::format("sparse entry ({}, {}) has non-finite weight", e.row, e.col));
    }
    if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
      throw DataError(fmt::format("duplicate sparse entry ({}, {})", e.row, e.col));
    }
  }
  m.entries_ = std::move(entries);
  m.build_offsets();
  return m;
}

void SparseMatrix::build_offsets() {
  offsets_.assign(rows_ + 1, 0);
  for (const auto& e : entries_) ++offsets_[e.row + 1];
  for (std::size_t r = 0; r < rows_; ++r) offsets_[r + 1] += offsets_[r];
}

float SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto entries = row(r);
  auto it = std::lower_bound(entries.begin(), entries.end(), c,
                             [](const SparseEntry& e, std::size_t col) { return e.col < col; });
  return (it != entries.end() && it->col == c) ? it->weight : 0.0f;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<SparseEntry> t;
  t.reserve(entries_.size());
  for (const auto& e : entries_) t.push_back({e.col, e.row, e.weight});
  return from_entries(cols_, rows_, std::move(t));
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(rows_, cols_);
  for (const auto& e : entries_) d(e.row, e.col) = e.weight;
  return d;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<SparseEntry> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    entries[i] = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), 1.0f};
  }
  return from_entries(n, n, std::move(entries));
}

// Layout of <stem>.coo: nnz records of (u32 row, u32 col, f32 weight).
void SparseMatrix::save(const std::filesystem::path& stem) const {
  io::write_json(io::with_ext(stem, ".json"),
                 {{"format", "coo"}, {"rows", rows_}, {"cols", cols_}, {"nnz", entries_.size()}});
  auto out = io::open_out(io::with_ext(stem, ".coo"), true);
  for (const auto& e : entries_) {
    io::write_pod(out, std::span<const std::uint32_t>(&e.row, 1));
    io::write_pod(out, std::span<const std::uint32_t>(&e.col, 1));
    io::write_pod(out, std::span<const float>(&e.weight, 1));
  }
}

SparseMatrix SparseMatrix::load(const std::filesystem::path& stem) {
  const auto header_path = io::with_ext(stem, ".json");
  const auto header = io::read_json(header_path);
  std::size_t rows = 0, cols = 0, nnz = 0;
  try {
    rows = header.at("rows").get<std::size_t>();
    cols = header.at("cols").get<std::size_t>();
    nnz = header.at("nnz").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad sparse header " + header_path.string() + ": " + e.what());
  }
  const auto body_path = io::with_ext(stem, ".coo");
  auto in = io::open_in(body_path, true);
  std::vector<SparseEntry> entries(nnz);
  for (auto& e : entries) {
    e.row = io::read_pod<std::uint32_t>(in, 1, body_path)[0];
    e.col = io::read_pod<std::uint32_t>(in, 1, body_path)[0];
    e.weight = io::read_pod<float>(in, 1, body_path)[0];
  }
  return from_entries(rows, cols, std::move(entries));
}

}  // namespace dream
