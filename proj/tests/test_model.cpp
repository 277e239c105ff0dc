#include <doctest.h>

#include "dream/baselines.hpp"
#include "dream/gradcheck.hpp"
#include "dream/graph_build.hpp"
#include "dream/log.hpp"
#include "dream/model.hpp"
#include "oracles.hpp"

using namespace dream;

namespace {

void check_close(const Matrix& a, const Matrix& b, double tol = 1e-6) {
  REQUIRE(a.same_shape(b));
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a.data()[k] - b.data()[k]) <= tol);
}

Matrix top_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(count, m.cols());
  for (std::size_t r = 0; r < count; ++r) std::copy(m.row(begin + r).begin(), m.row(begin + r).end(), out.row(r).begin());
  return out;
}

std::shared_ptr<ModelInputs> random_inputs(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  auto train = oracle::random_interactions(m, n, 0.35, rng);
  for (std::uint32_t u = 0; u < m; ++u) train.push_back({u, static_cast<std::uint32_t>(u % n)});
  std::sort(train.begin(), train.end());
  train.erase(std::unique(train.begin(), train.end()), train.end());
  auto in = std::make_shared<ModelInputs>();
  in->num_users = m;
  in->num_items = n;
  in->graph = build_normalized_adjacency(train, m, n);
  for (auto [mod, d] : {std::pair{Modality::Vision, std::size_t{6}}, std::pair{Modality::Text, std::size_t{4}}}) {
    const ModalFeatureMatrix items{mod, oracle::random_tensor(n, d, rng)};
    const auto users = derive_user_features(train, m, items);
    ModalSource s;
    s.modality = mod;
    s.item_features = Matrix::cast(items.data);
    s.user_features = Matrix::cast(users.data);
    s.item_graph = build_relation_graph(items, GraphScope::ItemItem, {2, false});
    s.user_graph = build_relation_graph(users, GraphScope::UserUser, {2, false});
    in->modalities.push_back(std::move(s));
  }
  return in;
}

BatchTriples batch_for(std::size_t m, std::size_t n) {
  BatchTriples b;
  for (std::size_t u = 0; u < m; ++u) {
    b.users.push_back(u);
    b.pos_items.push_back(u % n);
    b.neg_items.push_back((u + 1) % n);
  }
  return b;
}

}  // namespace

TEST_CASE("behavior_forward matches a dense layer-mean oracle") {
  std::mt19937_64 rng(5);
  const auto train = oracle::random_interactions(6, 5, 0.4, rng);
  const auto g = build_normalized_adjacency(train, 6, 5);
  const Matrix dense = oracle::normalized_adjacency(train, 6, 5);
  ParamStore p;
  auto& e = p.add("e", oracle::random_tensor(11, 3, rng));
  for (int layers : {0, 1, 2, 3}) {
    Tape t;
    const NodeId base = t.param(e);
    const auto out = behavior_forward(t, g.adjacency, base, layers, 6);
    Matrix layer = Matrix::cast(e.value), sum = layer;
    for (int l = 0; l < layers; ++l) {
      layer = matmul(dense, layer);
      for (std::size_t k = 0; k < sum.size(); ++k) sum.data()[k] += layer.data()[k];
    }
    for (auto& v : sum.data()) v /= layers + 1;
    check_close(t.value(out.user), top_rows(sum, 0, 6));
    check_close(t.value(out.item), top_rows(sum, 6, 5));
    if (layers == 0) CHECK(t.value(out.user) == top_rows(Matrix::cast(e.value), 0, 6));
  }
}

TEST_CASE("behavior_forward on an empty graph averages to E0 / (L+1)") {
  ParamStore p;
  auto& e = p.add("e", Tensor2D(3, 2, {1, 2, 3, 4, 5, 6}));
  Tape t;
  const auto out = behavior_forward(t, SparseMatrix(3, 3), t.param(e), 2, 1);
  check_close(t.value(out.user), Matrix(1, 2, std::vector<double>{1.0 / 3, 2.0 / 3}));
}

TEST_CASE("filter gate examples") {
  ParamStore p;
  auto& behavior = p.add("b", Tensor2D(2, 2, {1, -2, 3, 4}));
  auto& w = p.add("w", Tensor2D(3, 2, {0.3f, -0.1f, 0.2f, 0.5f, 1, 1}));
  auto& bias = p.add("bias", Tensor2D(1, 2));
  {
    Tape t;
    const NodeId out = filter_gate(t, Matrix(2, 3), t.param(behavior), t.param(w), t.param(bias));
    check_close(t.value(out), Matrix(2, 2, std::vector<double>{0.5, -1, 1.5, 2}));
  }
  w.value.fill(0.0f);
  bias.value.fill(20.0f);
  Tape t;
  std::mt19937_64 rng(1);
  const NodeId out = filter_gate(t, oracle::random_matrix(2, 3, rng), t.param(behavior), t.param(w), t.param(bias));
  check_close(t.value(out), Matrix::cast(behavior.value), 1e-6 * 4);
  CHECK_THROWS_AS(filter_gate(t, Matrix(3, 3), t.param(behavior), t.param(w), t.param(bias)), DimensionError);
}

TEST_CASE("modal_forward fusion examples") {
  ParamStore p;
  auto& x = p.add("x", Tensor2D(2, 2, {1, 0, 0, 1}));
  const SparseMatrix exchange = SparseMatrix::from_entries(2, 2, {{0, 1, 1.0f}, {1, 0, 1.0f}});
  {
    Tape t;
    const NodeId n = t.param(x);
    const ModalBranch branches[] = {{0.5, n, n, nullptr, nullptr}, {0.5, n, n, nullptr, nullptr}};
    const auto out = modal_forward(t, branches, 1);
    check_close(t.value(out.item), Matrix::cast(x.value));
  }
  {
    Tape t;
    const NodeId n = t.param(x);
    const ModalBranch branches[] = {{1.0, n, n, &exchange, &exchange}};
    const auto out = modal_forward(t, branches, 1);
    check_close(t.value(out.item), Matrix(2, 2, std::vector<double>{0, 1, 1, 0}));
  }
}

TEST_CASE("general representation and score") {
  ParamStore p;
  auto& b = p.add("b", Tensor2D(1, 2, {1, 2}));
  auto& m = p.add("m", Tensor2D(1, 2, {0.5f, -1}));
  Tape t;
  const auto g = general_representation(t, {t.param(b), t.param(b)}, {t.param(m), t.param(m)});
  check_close(t.value(g.user), Matrix(1, 2, std::vector<double>{1.5, 1}));
  const auto zero = general_representation(t, {t.param(b), t.param(b)}, {t.scale(t.param(b), -1.0), t.param(b)});
  check_close(t.value(zero.user), Matrix(1, 2));

  const float u[] = {1, 1}, i[] = {2, 3}, o[] = {-1, 1}, unit[] = {0.6f, 0.8f};
  CHECK(score(u, i) == 5.0);
  CHECK(score(u, o) == 0.0);
  CHECK(score(unit, unit) == doctest::Approx(1.0));
}

TEST_CASE("fusion weights follow disabled modalities") {
  std::mt19937_64 rng(2);
  const auto in = random_inputs(5, 4, rng);
  ModalLineConfig cfg;
  auto w = fusion_weights(cfg, *in);
  CHECK(w.vision == doctest::Approx(0.3));
  CHECK(w.text == doctest::Approx(0.7));
  cfg.text = false;
  w = fusion_weights(cfg, *in);
  CHECK(w.vision == 1.0);
  CHECK(w.text == 0.0);
}

TEST_CASE("fused raw features are the weighted sum when dimensions agree") {
  std::mt19937_64 rng(3);
  auto in = std::make_shared<ModelInputs>(*random_inputs(4, 4, rng));
  in->modalities[1].item_features = oracle::random_matrix(4, 6, rng);
  in->modalities[1].user_features = oracle::random_matrix(4, 6, rng);
  const auto [users, items] = fuse_raw_features(*in, {0.25, 0.75});
  for (std::size_t k = 0; k < items.size(); ++k) {
    CHECK(items.data()[k] == doctest::Approx(0.25 * in->modalities[0].item_features.data()[k] +
                                              0.75 * in->modalities[1].item_features.data()[k]));
  }
  CHECK(users.cols() == 6);
}

TEST_CASE("DREAM, LightGCN and VBPR losses pass the finite-difference check") {
  const auto prev = set_warning_sink([](const std::string&) {});
  std::mt19937_64 rng(9);
  const auto in = random_inputs(4, 6, rng);
  const auto batch = batch_for(4, 6);
  ModelConfig mc;
  mc.behavior.dim = 4;
  mc.modal.knn_k = 2;
  LossWeights w;
  w.alpha = 0.2;
  w.beta = 0.3;
  w.gamma = 0.5;
  w.lambda = 1e-2;
  DreamModel dream(in, mc, w, 1);
  CHECK(grad_check(dream.params(), [&](Tape& t) { return dream.batch_loss(t, batch).total; }).pass);

  BaselineConfig bc;
  bc.dim = 4;
  bc.bma_plug = true;
  LightGcnBaseline lgn(in, bc, w, 2);
  CHECK(grad_check(lgn.params(), [&](Tape& t) { return lgn.batch_loss(t, batch).total; }).pass);
  VbprBaseline vbpr(in, bc, w, 3);
  CHECK(grad_check(vbpr.params(), [&](Tape& t) { return vbpr.batch_loss(t, batch).total; }).pass);
  set_warning_sink(prev);
}

TEST_CASE("DREAM ablations keep the loss finite and drop the right parameters") {
  const auto prev = set_warning_sink([](const std::string&) {});
  std::mt19937_64 rng(10);
  const auto in = random_inputs(4, 6, rng);
  const auto batch = batch_for(4, 6);
  ModelConfig base;
  base.behavior.dim = 4;
  base.modal.knn_k = 2;
  const std::vector<std::function<void(ModelConfig&)>> edits{
      [](ModelConfig& c) { c.modal.filter_gate = false; }, [](ModelConfig& c) { c.modal.item_graph = false; },
      [](ModelConfig& c) { c.modal.text = false; },        [](ModelConfig& c) { c.modal.vision = false; },
      [](ModelConfig& c) { c.modal.enabled = false; },     [](ModelConfig& c) { c.modal.gate_input = GateInput::Aggregated; },
  };
  for (const auto& edit : edits) {
    ModelConfig c = base;
    edit(c);
    DreamModel model(in, c, {}, 4);
    Tape t;
    const auto loss = model.batch_loss(t, batch);
    CHECK(std::isfinite(t.scalar(loss.total)));
    const auto reps = model.represent();
    CHECK(reps.general_user.rows() == 4);
    CHECK(reps.general_item.rows() == 6);
  }
  ModelConfig off = base;
  off.modal.enabled = false;
  DreamModel behavior_only(in, off, {}, 4);
  const auto reps = behavior_only.represent();
  CHECK(reps.general_user == reps.behavior_user);
  set_warning_sink(prev);
}
