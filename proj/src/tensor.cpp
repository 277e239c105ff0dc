#include "dream/tensor.hpp"

#include <fmt/format.h>

namespace dream {

namespace {

void require(bool ok, const char* op, std::size_t ar, std::size_t ac, std::size_t br,
             std::size_t bc) {
  if (!ok) {
    throw DimensionError(fmt::format("{}: incompatible shapes {}x{} and {}x{}", op, ar, ac, br, bc));
  }
}

template <typename T>
Dense<T> select_rows_impl(const Dense<T>& a, std::span<const std::size_t> rows) {
  Dense<T> out(rows.size(), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.rows()) throw DimensionError("select_rows: row index out of range");
    std::copy(a.row(rows[r]).begin(), a.row(rows[r]).end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double v = a(i, k);
      if (v == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += v * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double v = arow[i];
      if (v == 0.0) continue;
      auto out = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += v * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  }
  return c;
}

Matrix normalize_rows(const Matrix& a, double eps) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double n = norm(a.row(r));
    if (n < eps) continue;
    auto src = a.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) dst[c] = src[c] / n;
  }
  return out;
}

Matrix cosine_similarity(const Matrix& a) {
  const Matrix n = normalize_rows(a);
  return matmul_nt(n, n);
}

Matrix select_rows(const Matrix& a, std::span<const std::size_t> rows) {
  return select_rows_impl(a, rows);
}

Tensor2D select_rows(const Tensor2D& a, std::span<const std::size_t> rows) {
  return select_rows_impl(a, rows);
}

}  // namespace dream
