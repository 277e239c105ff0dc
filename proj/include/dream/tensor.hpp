#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dream/errors.hpp"

namespace dream {

// Dense row-major matrix. Tensor2D (float) stores parameters and exported
// representations; Matrix (double) carries intermediate values on the tape.
template <typename T>
class Dense {
 public:
  using value_type = T;

  Dense() = default;
  Dense(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Dense(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("dense matrix data length does not match rows*cols");
    }
  }

  template <typename U>
  static Dense cast(const Dense<U>& other) {
    Dense out(other.rows(), other.cols());
    std::transform(other.data().begin(), other.data().end(), out.data_.begin(),
                   [](U v) { return static_cast<T>(v); });
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  T operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Dense& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Dense& a, const Dense& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Tensor2D = Dense<float>;
using Matrix = Dense<double>;

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * b[k];
  return acc;
}

template <typename T>
double norm(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

/// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
/// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Rows scaled to unit L2 norm; rows with norm below eps become zero.
Matrix normalize_rows(const Matrix& a, double eps = 1e-12);

/// Pairwise cosine similarity between rows of `a`. Zero rows have zero similarity.
Matrix cosine_similarity(const Matrix& a);

Matrix select_rows(const Matrix& a, std::span<const std::size_t> rows);
Tensor2D select_rows(const Tensor2D& a, std::span<const std::size_t> rows);

}  // namespace dream
