#include <doctest.h>

#include <cmath>

#include "dream/autodiff.hpp"
#include "dream/gradcheck.hpp"
#include "dream/params.hpp"
#include "dream/sparse.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace dream;

TEST_CASE("spmm examples") {
  std::mt19937_64 rng(1);
  const Matrix d = oracle::random_matrix(4, 3, rng);
  CHECK(spmm(SparseMatrix::identity(4), d) == d);
  CHECK(spmm(SparseMatrix(4, 4), d) == Matrix(4, 3));

  const auto s = SparseMatrix::from_entries(2, 2, {{0, 1, 0.5f}, {1, 0, 0.5f}});
  const Matrix x(2, 2, std::vector<double>{2, 0, 0, 4});
  CHECK(spmm(s, x) == Matrix(2, 2, std::vector<double>{0, 2, 1, 0}));
  CHECK_THROWS_AS(spmm(s, Matrix(3, 2)), DimensionError);
}

TEST_CASE("spmm and its transpose agree with dense products") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SparseEntry> entries;
    std::uniform_real_distribution<float> w(-1, 1);
    for (std::uint32_t r = 0; r < 7; ++r) {
      for (std::uint32_t c = 0; c < 5; ++c) {
        if ((r * 5 + c + trial) % 3 == 0) entries.push_back({r, c, w(rng)});
      }
    }
    const auto s = SparseMatrix::from_entries(7, 5, entries);
    const Matrix x = oracle::random_matrix(5, 4, rng), y = oracle::random_matrix(7, 4, rng);
    const Matrix dense = s.to_dense();
    const Matrix a = spmm(s, x), b = matmul(dense, x);
    const Matrix at = spmm_transposed(s, y), bt = matmul_tn(dense, y);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.data()[k] == doctest::Approx(b.data()[k]));
    for (std::size_t k = 0; k < at.size(); ++k) CHECK(at.data()[k] == doctest::Approx(bt.data()[k]));
  }
}

TEST_CASE("sparse save and load round trip") {
  scratch::Dir dir("sparse");
  const auto s = SparseMatrix::from_entries(3, 4, {{0, 3, 0.25f}, {2, 1, -1.5f}});
  s.save(dir / "g");
  CHECK(SparseMatrix::load(dir / "g") == s);
}

TEST_CASE("xavier_init bounds and determinism") {
  const auto a = xavier_init(1, 5, 3);
  for (float v : a.data()) CHECK(std::abs(v) <= 1.0f);
  CHECK(xavier_init(1, 5, 3) == a);
  CHECK_FALSE(xavier_init(1, 5, 4) == a);
  const auto big = xavier_init(100, 50, 1);
  const float bound = static_cast<float>(std::sqrt(6.0 / 150.0));
  for (float v : big.data()) CHECK(std::abs(v) <= bound);
}

namespace {

struct ScalarAdam {
  double x, m = 0, v = 0;
  int t = 0;
  void step(double g, const AdamConfig& c) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t)), vh = v / (1 - std::pow(c.beta2, t));
    x -= c.lr * mh / (std::sqrt(vh) + c.eps);
  }
};

}  // namespace

TEST_CASE("adam_step examples") {
  AdamConfig cfg;
  ParamStore zero;
  zero.add("e", Tensor2D(2, 2, {1, 2, 3, 4}));
  zero.adam_step(cfg);
  CHECK(zero.at("e").value == Tensor2D(2, 2, {1, 2, 3, 4}));

  ParamStore p;
  auto& s = p.add("w", Tensor2D(1, 1, {0.5f}));
  s.grad(0, 0) = 1.0f;
  p.adam_step(cfg);
  CHECK(s.value(0, 0) - 0.5f == doctest::Approx(-0.001).epsilon(1e-4));
  CHECK(p.step() == 1);
  CHECK(s.grad(0, 0) == 0.0f);

  ScalarAdam ref{static_cast<double>(s.value(0, 0))};
  ref.m = s.adam_m(0, 0);
  ref.v = s.adam_v(0, 0);
  ref.t = 1;
  for (int i = 0; i < 2; ++i) {
    const float before = s.value(0, 0);
    p.adam_step(cfg);
    ref.step(0.0, cfg);
    CHECK(s.value(0, 0) != before);
    CHECK(std::abs(s.value(0, 0) - ref.x) < 1e-7);
  }
}

TEST_CASE("adam_step rejects non-finite gradients without touching values") {
  ParamStore p;
  auto& s = p.add("w", Tensor2D(1, 2, {1, 2}));
  s.grad(0, 1) = NAN;
  try {
    p.adam_step({});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("w") != std::string::npos);
  }
  CHECK(s.value == Tensor2D(1, 2, {1, 2}));
}

TEST_CASE("checkpoint round trip and mismatch") {
  scratch::Dir dir("ckpt");
  ParamStore p;
  p.add("a", xavier_init(3, 2, 1));
  p.add("b", xavier_init(1, 4, 2));
  p.at("a").grad.fill(0.5f);
  p.adam_step({});
  p.save(dir / "ckpt");

  ParamStore q;
  q.add("a", Tensor2D(3, 2));
  q.add("b", Tensor2D(1, 4));
  q.load(dir / "ckpt");
  CHECK(q.step() == 1);
  CHECK(q.at("a").value == p.at("a").value);
  CHECK(q.at("a").adam_m == p.at("a").adam_m);
  CHECK(q.at("b").adam_v == p.at("b").adam_v);

  ParamStore wrong;
  wrong.add("a", Tensor2D(3, 3));
  wrong.add("b", Tensor2D(1, 4));
  CHECK_THROWS_AS(wrong.load(dir / "ckpt"), DimensionError);
}

TEST_CASE("backward on simple losses") {
  ParamStore p;
  auto& e = p.add("e", Tensor2D(2, 3, {1, -2, 3, 0.5f, 0, -1}));
  {
    Tape t;
    t.backward(t.sum(t.param(e)));
    for (float g : e.grad.data()) CHECK(g == 1.0f);
  }
  e.zero_grad();
  {
    Tape t;
    t.backward(t.half_squared_norm(t.param(e)));
    CHECK(e.grad == e.value);
  }
  Tape t;
  const NodeId loss = t.sum(t.param(e));
  t.backward(loss);
  CHECK_THROWS_AS(t.grad(loss + 99), InternalError);
}

TEST_CASE("stop_gradient blocks gradient flow") {
  ParamStore p;
  auto& e = p.add("e", Tensor2D(1, 2, {1, 2}));
  Tape t;
  const NodeId x = t.param(e);
  t.backward(t.sum(t.add(t.stop_gradient(x), t.scale(x, 3.0))));
  CHECK(e.grad == Tensor2D(1, 2, {3, 3}));
}

TEST_CASE("grad_check on a composite graph and on a constant") {
  std::mt19937_64 rng(4);
  ParamStore p;
  auto& a = p.add("a", oracle::random_tensor(5, 3, rng));
  auto& b = p.add("b", oracle::random_tensor(4, 3, rng));
  const SparseMatrix s = SparseMatrix::from_entries(5, 5, {{0, 1, 0.5f}, {1, 0, 0.5f}, {3, 4, 1.0f}});
  const std::vector<std::size_t> rows{0, 2, 2, 4};
  const auto report = grad_check(p, [&](Tape& t) {
    const NodeId x = t.normalize_rows(t.spmm(s, t.param(a)));
    const NodeId g = t.gather_rows(x, rows);
    const NodeId y = t.sigmoid(t.param(b));
    return t.add(t.softmax_xent_diag(t.matmul_nt(g, y), 5.0), t.mse(g, t.hadamard(y, y)));
  });
  CHECK(report.pass);
  for (const auto& entry : report.params) CHECK(entry.max_rel_error < 1e-3);

  const auto flat = grad_check(p, [](Tape& t) { return t.constant(Matrix(1, 1, 3.0)); });
  CHECK(flat.pass);
}
