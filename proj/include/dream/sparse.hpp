#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dream/tensor.hpp"

namespace dream {

struct SparseEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  float weight = 0.0f;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Coordinate-format sparse matrix. Entries are kept sorted by (row, col)
// with no duplicates; a row-offset index makes row access O(1).
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Sorts the entries and validates ranges, duplicates and finiteness.
  static SparseMatrix from_entries(std::size_t rows, std::size_t cols,
                                   std::vector<SparseEntry> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  const std::vector<SparseEntry>& entries() const noexcept { return entries_; }

  std::span<const SparseEntry> row(std::size_t r) const {
    return {entries_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
  }

  /// Weight at (r, c), or 0 when absent.
  float at(std::size_t r, std::size_t c) const;

  SparseMatrix transpose() const;
  Matrix to_dense() const;

  static SparseMatrix identity(std::size_t n);

  void save(const std::filesystem::path& stem) const;
  static SparseMatrix load(const std::filesystem::path& stem);

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.entries_ == b.entries_;
  }

 private:
  void build_offsets();

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<SparseEntry> entries_;
  std::vector<std::size_t> offsets_{0};
};

/// out = graph * dense. Accumulates in sorted coordinate order.
template <typename T>
Dense<T> spmm(const SparseMatrix& graph, const Dense<T>& dense) {
  if (graph.cols() != dense.rows()) {
    throw DimensionError("spmm: sparse cols " + std::to_string(graph.cols()) +
                         " != dense rows " + std::to_string(dense.rows()));
  }
  Dense<T> out(graph.rows(), dense.cols());
  for (const auto& e : graph.entries()) {
    auto dst = out.row(e.row);
    auto src = dense.row(e.col);
    const T w = static_cast<T>(e.weight);
    for (std::size_t c = 0; c < dense.cols(); ++c) dst[c] += w * src[c];
  }
  return out;
}

/// out = graph^T * dense, without materialising the transpose.
template <typename T>
Dense<T> spmm_transposed(const SparseMatrix& graph, const Dense<T>& dense) {
  if (graph.rows() != dense.rows()) {
    throw DimensionError("spmm_transposed: sparse rows " + std::to_string(graph.rows()) +
                         " != dense rows " + std::to_string(dense.rows()));
  }
  Dense<T> out(graph.cols(), dense.cols());
  for (const auto& e : graph.entries()) {
    auto dst = out.row(e.col);
    auto src = dense.row(e.row);
    const T w = static_cast<T>(e.weight);
    for (std::size_t c = 0; c < dense.cols(); ++c) dst[c] += w * src[c];
  }
  return out;
}

}  // namespace dream
