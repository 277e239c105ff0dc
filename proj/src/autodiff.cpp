#include "dream/autodiff.hpp"

#include <fmt/format.h>

namespace dream {

namespace {

constexpr double kNormEps = 1e-12;

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(fmt::format("{}: shapes {}x{} and {}x{} differ", op, a.rows(), a.cols(),
                                     b.rows(), b.cols()));
  }
}

Matrix scalar_matrix(double v) { return Matrix(1, 1, v); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

NodeId Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, const Node&)> backprop) {
  if (backward_done_) throw InternalError("tape already differentiated; record a new tape");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw InternalError(fmt::format("node {} is not on the recorded graph ({} nodes)", id, nodes_.size()));
  }
  return nodes_[id];
}

void Tape::accumulate(NodeId id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto& dst = n.grad.data();
  const auto& src = g.data();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

void Tape::accumulate(NodeId id, Matrix&& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(g);
    return;
  }
  accumulate(id, static_cast<const Matrix&>(g));
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }

double Tape::scalar(NodeId id) const {
  const auto& v = node(id).value;
  if (v.rows() != 1 || v.cols() != 1) throw InternalError("scalar(): node is not 1x1");
  return v(0, 0);
}

bool Tape::requires_grad(NodeId id) const { return node(id).requires_grad; }

Matrix Tape::grad(NodeId id) const {
  const auto& n = node(id);
  if (!backward_done_) throw InternalError("grad() requested before backward()");
  return n.grad.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad;
}

// ---------------------------------------------------------------- leaves

NodeId Tape::param(ParamSlot& slot) {
  const NodeId id = push(Matrix::cast(slot.value), slot.trainable, [](Tape&, const Node&) {});
  nodes_[id].slot = &slot;
  return id;
}

NodeId Tape::constant(Matrix value) { return push(std::move(value), false); }

NodeId Tape::stop_gradient(NodeId x) { return push(node(x).value, false); }

// ---------------------------------------------------------------- linear maps

NodeId Tape::spmm(const SparseMatrix& graph, NodeId x) {
  const auto& xn = node(x);
  return push(dream::spmm(graph, xn.value), xn.requires_grad, [&graph, x](Tape& t, const Node& self) {
    t.accumulate(x, dream::spmm_transposed(graph, self.grad));
  });
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const auto& an = node(a);
  const auto& bn = node(b);
  return push(dream::matmul(an.value, bn.value), an.requires_grad || bn.requires_grad,
              [a, b](Tape& t, const Node& self) {
                if (t.nodes_[a].requires_grad) t.accumulate(a, dream::matmul_nt(self.grad, t.nodes_[b].value));
                if (t.nodes_[b].requires_grad) t.accumulate(b, dream::matmul_tn(t.nodes_[a].value, self.grad));
              });
}

NodeId Tape::matmul_const(const Matrix& lhs, NodeId x) {
  const auto& xn = node(x);
  return push(dream::matmul(lhs, xn.value), xn.requires_grad, [&lhs, x](Tape& t, const Node& self) {
    t.accumulate(x, dream::matmul_tn(lhs, self.grad));
  });
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const auto& an = node(a);
  const auto& bn = node(b);
  return push(dream::matmul_nt(an.value, bn.value), an.requires_grad || bn.requires_grad,
              [a, b](Tape& t, const Node& self) {
                // C = A B^T: dA = G B, dB = G^T A
                if (t.nodes_[a].requires_grad) t.accumulate(a, dream::matmul(self.grad, t.nodes_[b].value));
                if (t.nodes_[b].requires_grad) t.accumulate(b, dream::matmul_tn(self.grad, t.nodes_[a].value));
              });
}

NodeId Tape::add(NodeId a, NodeId b) {
  const auto& an = node(a);
  const auto& bn = node(b);
  check_same_shape(an.value, bn.value, "add");
  Matrix out = an.value;
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += bn.value.data()[k];
  return push(std::move(out), an.requires_grad || bn.requires_grad, [a, b](Tape& t, const Node& self) {
    t.accumulate(a, self.grad);
    t.accumulate(b, self.grad);
  });
}

NodeId Tape::scale(NodeId x, double s) {
  const auto& xn = node(x);
  Matrix out = xn.value;
  for (auto& v : out.data()) v *= s;
  return push(std::move(out), xn.requires_grad, [x, s](Tape& t, const Node& self) {
    Matrix g = self.grad;
    for (auto& v : g.data()) v *= s;
    t.accumulate(x, std::move(g));
  });
}

NodeId Tape::add_row_bias(NodeId x, NodeId bias) {
  const auto& xn = node(x);
  const auto& bn = node(bias);
  if (bn.value.rows() != 1 || bn.value.cols() != xn.value.cols()) {
    throw DimensionError(fmt::format("add_row_bias: bias {}x{} for input with {} cols", bn.value.rows(),
                                     bn.value.cols(), xn.value.cols()));
  }
  Matrix out = xn.value;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] += bn.value(0, c);
  }
  return push(std::move(out), xn.requires_grad || bn.requires_grad, [x, bias](Tape& t, const Node& self) {
    t.accumulate(x, self.grad);
    if (t.nodes_[bias].requires_grad) {
      Matrix gb(1, self.grad.cols());
      for (std::size_t r = 0; r < self.grad.rows(); ++r) {
        for (std::size_t c = 0; c < self.grad.cols(); ++c) gb(0, c) += self.grad(r, c);
      }
      t.accumulate(bias, std::move(gb));
    }
  });
}

NodeId Tape::vstack(NodeId top, NodeId bottom) {
  const auto& tn = node(top);
  const auto& bn = node(bottom);
  if (tn.value.cols() != bn.value.cols()) throw DimensionError("vstack: column counts differ");
  const std::size_t split = tn.value.rows();
  Matrix out(tn.value.rows() + bn.value.rows(), tn.value.cols());
  std::copy(tn.value.data().begin(), tn.value.data().end(), out.data().begin());
  std::copy(bn.value.data().begin(), bn.value.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(tn.value.size()));
  return push(std::move(out), tn.requires_grad || bn.requires_grad,
              [top, bottom, split](Tape& t, const Node& self) {
                const std::size_t cols = self.grad.cols();
                const auto mid = self.grad.data().begin() + static_cast<std::ptrdiff_t>(split * cols);
                if (t.nodes_[top].requires_grad) {
                  t.accumulate(top, Matrix(split, cols, std::vector<double>(self.grad.data().begin(), mid)));
                }
                if (t.nodes_[bottom].requires_grad) {
                  t.accumulate(bottom, Matrix(self.grad.rows() - split, cols,
                                              std::vector<double>(mid, self.grad.data().end())));
                }
              });
}

NodeId Tape::hstack(NodeId left, NodeId right) {
  const auto& ln = node(left);
  const auto& rn = node(right);
  if (ln.value.rows() != rn.value.rows()) throw DimensionError("hstack: row counts differ");
  const std::size_t lc = ln.value.cols();
  const std::size_t rc = rn.value.cols();
  Matrix out(ln.value.rows(), lc + rc);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::copy(ln.value.row(r).begin(), ln.value.row(r).end(), out.row(r).begin());
    std::copy(rn.value.row(r).begin(), rn.value.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(lc));
  }
  return push(std::move(out), ln.requires_grad || rn.requires_grad,
              [left, right, lc, rc](Tape& t, const Node& self) {
                Matrix gl(self.grad.rows(), lc);
                Matrix gr(self.grad.rows(), rc);
                for (std::size_t r = 0; r < self.grad.rows(); ++r) {
                  auto src = self.grad.row(r);
                  std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(lc), gl.row(r).begin());
                  std::copy(src.begin() + static_cast<std::ptrdiff_t>(lc), src.end(), gr.row(r).begin());
                }
                t.accumulate(left, std::move(gl));
                t.accumulate(right, std::move(gr));
              });
}

NodeId Tape::slice_rows(NodeId x, std::size_t begin, std::size_t count) {
  const auto& xn = node(x);
  if (begin + count > xn.value.rows()) throw DimensionError("slice_rows: range out of bounds");
  const std::size_t cols = xn.value.cols();
  const std::size_t total = xn.value.rows();
  auto first = xn.value.data().begin() + static_cast<std::ptrdiff_t>(begin * cols);
  Matrix out(count, cols,
             std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * cols)));
  return push(std::move(out), xn.requires_grad, [x, begin, total](Tape& t, const Node& self) {
    Matrix g(total, self.grad.cols());
    std::copy(self.grad.data().begin(), self.grad.data().end(),
              g.data().begin() + static_cast<std::ptrdiff_t>(begin * self.grad.cols()));
    t.accumulate(x, std::move(g));
  });
}

NodeId Tape::gather_rows(NodeId x, std::span<const std::size_t> rows) {
  const auto& xn = node(x);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Matrix out = select_rows(xn.value, idx);
  const std::size_t total = xn.value.rows();
  return push(std::move(out), xn.requires_grad, [x, idx = std::move(idx), total](Tape& t, const Node& self) {
    Matrix g(total, self.grad.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto dst = g.row(idx[r]);
      auto src = self.grad.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    t.accumulate(x, std::move(g));
  });
}

// ---------------------------------------------------------------- element-wise

NodeId Tape::hadamard(NodeId a, NodeId b) {
  const auto& an = node(a);
  const auto& bn = node(b);
  check_same_shape(an.value, bn.value, "hadamard");
  Matrix out = an.value;
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] *= bn.value.data()[k];
  return push(std::move(out), an.requires_grad || bn.requires_grad, [a, b](Tape& t, const Node& self) {
    for (auto [target, other] : {std::pair{a, b}, std::pair{b, a}}) {
      if (!t.nodes_[target].requires_grad) continue;
      Matrix g = self.grad;
      const auto& ov = t.nodes_[other].value.data();
      for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] *= ov[k];
      t.accumulate(target, std::move(g));
    }
  });
}

NodeId Tape::sigmoid(NodeId x) {
  const auto& xn = node(x);
  Matrix out = xn.value;
  for (auto& v : out.data()) v = stable_sigmoid(v);
  return push(std::move(out), xn.requires_grad, [x](Tape& t, const Node& self) {
    Matrix g = self.grad;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double y = self.value.data()[k];
      g.data()[k] *= y * (1.0 - y);
    }
    t.accumulate(x, std::move(g));
  });
}

NodeId Tape::normalize_rows(NodeId x) {
  const auto& xn = node(x);
  Matrix out(xn.value.rows(), xn.value.cols());
  std::vector<double> norms(xn.value.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    norms[r] = norm(xn.value.row(r));
    if (norms[r] < kNormEps) {
      ++zero_norm_rows_;
      continue;
    }
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = xn.value(r, c) / norms[r];
  }
  return push(std::move(out), xn.requires_grad, [x, norms = std::move(norms)](Tape& t, const Node& self) {
    // d(x/|x|) = (g - y (y.g)) / |x|
    Matrix g(self.grad.rows(), self.grad.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (norms[r] < kNormEps) continue;
      const double yg = dot(self.value.row(r), self.grad.row(r));
      for (std::size_t c = 0; c < g.cols(); ++c) {
        g(r, c) = (self.grad(r, c) - self.value(r, c) * yg) / norms[r];
      }
    }
    t.accumulate(x, std::move(g));
  });
}

NodeId Tape::row_dot(NodeId a, NodeId b) {
  const auto& an = node(a);
  const auto& bn = node(b);
  check_same_shape(an.value, bn.value, "row_dot");
  Matrix out(an.value.rows(), 1);
  for (std::size_t r = 0; r < out.rows(); ++r) out(r, 0) = dot(an.value.row(r), bn.value.row(r));
  return push(std::move(out), an.requires_grad || bn.requires_grad, [a, b](Tape& t, const Node& self) {
    for (auto [target, other] : {std::pair{a, b}, std::pair{b, a}}) {
      if (!t.nodes_[target].requires_grad) continue;
      Matrix g = t.nodes_[other].value;
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (auto& v : g.row(r)) v *= self.grad(r, 0);
      }
      t.accumulate(target, std::move(g));
    }
  });
}

// ---------------------------------------------------------------- reductions

NodeId Tape::sum(NodeId x) {
  const auto& xn = node(x);
  double s = 0.0;
  for (double v : xn.value.data()) s += v;
  return push(scalar_matrix(s), xn.requires_grad, [x](Tape& t, const Node& self) {
    const auto& v = t.nodes_[x].value;
    t.accumulate(x, Matrix(v.rows(), v.cols(), self.grad(0, 0)));
  });
}

NodeId Tape::half_squared_norm(NodeId x) {
  const auto& xn = node(x);
  double s = 0.0;
  for (double v : xn.value.data()) s += v * v;
  return push(scalar_matrix(0.5 * s), xn.requires_grad, [x](Tape& t, const Node& self) {
    Matrix g = t.nodes_[x].value;
    for (auto& v : g.data()) v *= self.grad(0, 0);
    t.accumulate(x, std::move(g));
  });
}

NodeId Tape::mean_row_sq_norm(NodeId x) {
  const auto& xn = node(x);
  if (xn.value.rows() == 0) throw DimensionError("mean_row_sq_norm: empty input");
  double s = 0.0;
  for (double v : xn.value.data()) s += v * v;
  const double rows = static_cast<double>(xn.value.rows());
  return push(scalar_matrix(s / rows), xn.requires_grad, [x, rows](Tape& t, const Node& self) {
    Matrix g = t.nodes_[x].value;
    const double f = 2.0 * self.grad(0, 0) / rows;
    for (auto& v : g.data()) v *= f;
    t.accumulate(x, std::move(g));
  });
}

NodeId Tape::mse(NodeId a, NodeId b) {
  const auto& an = node(a);
  const auto& bn = node(b);
  check_same_shape(an.value, bn.value, "mse");
  if (an.value.empty()) throw DimensionError("mse: empty input");
  Matrix diff = an.value;
  double s = 0.0;
  for (std::size_t k = 0; k < diff.size(); ++k) {
    diff.data()[k] -= bn.value.data()[k];
    s += diff.data()[k] * diff.data()[k];
  }
  const double n = static_cast<double>(diff.size());
  return push(scalar_matrix(s / n), an.requires_grad || bn.requires_grad,
              [a, b, n, diff = std::move(diff)](Tape& t, const Node& self) {
                Matrix g = diff;
                const double f = 2.0 * self.grad(0, 0) / n;
                for (auto& v : g.data()) v *= f;
                if (t.nodes_[b].requires_grad) {
                  Matrix gb = g;
                  for (auto& v : gb.data()) v = -v;
                  t.accumulate(b, std::move(gb));
                }
                t.accumulate(a, std::move(g));
              });
}

NodeId Tape::softmax_xent_diag(NodeId logits, double scale) {
  const auto& ln = node(logits);
  const Matrix& z = ln.value;
  if (z.rows() > z.cols()) throw DimensionError("softmax_xent_diag: fewer candidates than anchors");
  if (z.rows() == 0) throw DimensionError("softmax_xent_diag: empty batch");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : z.row(r)) mx = std::max(mx, scale * v);
    double denom = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      probs(r, c) = std::exp(scale * z(r, c) - mx);
      denom += probs(r, c);
    }
    for (auto& p : probs.row(r)) p /= denom;
    total += (mx + std::log(denom)) - scale * z(r, r);
  }
  const double rows = static_cast<double>(z.rows());
  return push(scalar_matrix(total / rows), ln.requires_grad,
              [logits, scale, rows, probs = std::move(probs)](Tape& t, const Node& self) {
                Matrix g = probs;
                const double f = self.grad(0, 0) * scale / rows;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                  g(r, r) -= 1.0;
                  for (auto& v : g.row(r)) v *= f;
                }
                t.accumulate(logits, std::move(g));
              });
}

NodeId Tape::bpr(NodeId pos, NodeId neg, double clamp) {
  const auto& pn = node(pos);
  const auto& nn = node(neg);
  check_same_shape(pn.value, nn.value, "bpr");
  if (pn.value.cols() != 1 || pn.value.rows() == 0) throw DimensionError("bpr: expects a non-empty column");
  const double cap = -std::log(clamp);
  const std::size_t b = pn.value.rows();
  std::vector<double> dloss(b);
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double margin = pn.value(r, 0) - nn.value(r, 0);
    const double loss = softplus(-margin);
    if (loss >= cap) {
      total += cap;
      dloss[r] = 0.0;
    } else {
      total += loss;
      dloss[r] = -stable_sigmoid(-margin);
    }
  }
  const double rows = static_cast<double>(b);
  return push(scalar_matrix(total / rows), pn.requires_grad || nn.requires_grad,
              [pos, neg, rows, dloss = std::move(dloss)](Tape& t, const Node& self) {
                Matrix gp(dloss.size(), 1);
                for (std::size_t r = 0; r < dloss.size(); ++r) gp(r, 0) = dloss[r] * self.grad(0, 0) / rows;
                Matrix gn = gp;
                for (auto& v : gn.data()) v = -v;
                t.accumulate(pos, std::move(gp));
                t.accumulate(neg, std::move(gn));
              });
}

NodeId Tape::weighted_sum(std::span<const std::pair<NodeId, double>> terms) {
  double s = 0.0;
  bool rg = false;
  for (auto [id, w] : terms) {
    s += w * scalar(id);
    rg = rg || node(id).requires_grad;
  }
  std::vector<std::pair<NodeId, double>> copy(terms.begin(), terms.end());
  return push(scalar_matrix(s), rg, [copy = std::move(copy)](Tape& t, const Node& self) {
    for (auto [id, w] : copy) {
      if (w != 0.0) t.accumulate(id, scalar_matrix(w * self.grad(0, 0)));
    }
  });
}

// ---------------------------------------------------------------- backward

void Tape::backward(NodeId loss) {
  const auto& ln = node(loss);
  if (ln.value.rows() != 1 || ln.value.cols() != 1) throw InternalError("backward(): loss must be 1x1");
  if (backward_done_) throw InternalError("backward() called twice on the same tape");
  backward_done_ = true;
  if (!ln.requires_grad) return;
  nodes_[loss].grad = scalar_matrix(1.0);
  for (std::size_t k = loss + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.grad.empty()) continue;
    if (n.slot != nullptr) {
      auto& dst = n.slot->grad.data();
      const auto& src = n.grad.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += static_cast<float>(src[j]);
    } else if (n.backprop) {
      n.backprop(*this, n);
    }
  }
}

}  // namespace dream
