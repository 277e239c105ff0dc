#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "dream/params.hpp"
#include "dream/sparse.hpp"
#include "dream/tensor.hpp"

namespace dream {

using NodeId = std::size_t;

// Reverse-mode gradient tape over the closed operator set the recommender
// needs. Each op evaluates eagerly in double precision and records a
// backward closure. Sparse graphs passed to spmm must outlive the tape.
//
// Parameters enter through param(); backward() accumulates into their
// ParamSlot::grad. stop_gradient() and constant() nodes never receive or
// forward gradient.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves
  NodeId param(ParamSlot& slot);
  NodeId constant(Matrix value);
  NodeId stop_gradient(NodeId x);

  // Linear maps
  NodeId spmm(const SparseMatrix& graph, NodeId x);
  NodeId matmul(NodeId a, NodeId b);
  /// lhs * x for a constant lhs held by reference (must outlive the tape).
  NodeId matmul_const(const Matrix& lhs, NodeId x);
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, double s);
  NodeId add_row_bias(NodeId x, NodeId bias);
  NodeId vstack(NodeId top, NodeId bottom);
  NodeId hstack(NodeId left, NodeId right);
  NodeId slice_rows(NodeId x, std::size_t begin, std::size_t count);
  NodeId gather_rows(NodeId x, std::span<const std::size_t> rows);

  // Element-wise / row-wise
  NodeId hadamard(NodeId a, NodeId b);
  NodeId sigmoid(NodeId x);
  NodeId normalize_rows(NodeId x);
  /// Column vector of per-row inner products.
  NodeId row_dot(NodeId a, NodeId b);

  // Scalar reductions (1x1 results)
  NodeId sum(NodeId x);
  NodeId half_squared_norm(NodeId x);
  /// Sum of squares divided by the row count.
  NodeId mean_row_sq_norm(NodeId x);
  /// Mean squared difference over all entries.
  NodeId mse(NodeId a, NodeId b);
  /// Mean over rows j of -log softmax(scale * logits[j, :])[j].
  NodeId softmax_xent_diag(NodeId logits, double scale);
  /// Mean over rows of -log(max(sigmoid(pos - neg), clamp)).
  NodeId bpr(NodeId pos, NodeId neg, double clamp = 1e-12);
  NodeId weighted_sum(std::span<const std::pair<NodeId, double>> terms);
  NodeId weighted_sum(std::initializer_list<std::pair<NodeId, double>> terms) {
    return weighted_sum(std::span<const std::pair<NodeId, double>>(terms.begin(), terms.size()));
  }

  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;
  bool requires_grad(NodeId id) const;
  /// Gradient of the last backward() root w.r.t. node `id`; zero-filled
  /// when no gradient reached it.
  Matrix grad(NodeId id) const;

  void backward(NodeId loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Rows seen by normalize_rows() with (near-)zero norm.
  std::size_t zero_norm_rows() const noexcept { return zero_norm_rows_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    ParamSlot* slot = nullptr;
    std::function<void(Tape&, const Node&)> backprop;
  };

  NodeId push(Matrix value, bool requires_grad,
              std::function<void(Tape&, const Node&)> backprop = {});
  const Node& node(NodeId id) const;
  void accumulate(NodeId id, const Matrix& g);
  void accumulate(NodeId id, Matrix&& g);

  std::vector<Node> nodes_;
  std::size_t zero_norm_rows_ = 0;
  bool backward_done_ = false;
};

}  // namespace dream
