#include "dream/baselines.hpp"

#include <random>

namespace dream {

namespace {

FusionWeights baseline_fusion(const ModelInputs& inputs, double vision_weight) {
  ModalLineConfig cfg;
  cfg.vision_weight = vision_weight;
  return fusion_weights(cfg, inputs);
}

Matrix random_projection(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(rows)));
  Matrix p(rows, cols);
  for (auto& v : p.data()) v = dist(rng);
  return p;
}

Matrix hconcat_features(const ModelInputs& inputs, Matrix ModalSource::*member) {
  std::size_t cols = 0;
  for (const auto& s : inputs.modalities) cols += (s.*member).cols();
  const std::size_t rows = (inputs.modalities.front().*member).rows();
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& s : inputs.modalities) {
    const auto& f = s.*member;
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(f.row(r).begin(), f.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += f.cols();
  }
  return out;
}

Tensor2D to_tensor(const Tape& tape, NodeId id) { return Tensor2D::cast(tape.value(id)); }

// BPR + lambda * L2 + optional plug, shared by both baselines.
LossTerms host_loss(Tape& tape, NodeId general_user, NodeId general_item, std::span<const std::pair<NodeId, NodeId>> l2_rows,
                    LinePair behavior, LinePair modal, const BatchTriples& batch, const LossWeights& w, bool plug) {
  std::vector<std::pair<NodeId, double>> terms;
  LossParts parts;
  const NodeId general = bpr_loss(tape, general_user, general_item, batch);
  parts.general = tape.scalar(general);
  terms.emplace_back(general, 1.0);
  if (w.lambda > 0.0) {
    for (auto [users, items] : l2_rows) {
      const NodeId l2 = embedding_l2(tape, users, items, batch);
      parts.l2 += tape.scalar(l2);
      terms.emplace_back(l2, w.lambda);
    }
  }
  LossWeights effective = w;
  if (plug && (w.alpha > 0.0 || w.beta > 0.0)) {
    AlignmentNodes a{};
    terms.emplace_back(bma_plug(tape, behavior.user, behavior.item, modal.user, modal.item, batch, w, &a), 1.0);
    parts.bia = tape.scalar(a.bia);
    parts.mia = tape.scalar(a.mia);
    parts.inter = tape.scalar(a.inter);
  } else {
    effective.alpha = effective.beta = 0.0;
  }
  effective.gamma = 0.0;
  LossTerms out;
  out.breakdown = total_loss(parts, effective);
  out.total = tape.weighted_sum(terms);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- LightGCN

LightGcnBaseline::LightGcnBaseline(std::shared_ptr<const ModelInputs> inputs, BaselineConfig config,
                                   LossWeights weights, std::uint64_t seed)
    : inputs_(std::move(inputs)), config_(config), weights_(weights) {
  weights_.validate();
  params_.add("user_embedding", xavier_init(inputs_->num_users, config_.dim, derive_seed(seed, 0)));
  params_.add("item_embedding", xavier_init(inputs_->num_items, config_.dim, derive_seed(seed, 1)));
  if (!inputs_->modalities.empty()) {
    std::tie(fused_users_, fused_items_) =
        fuse_raw_features(*inputs_, baseline_fusion(*inputs_, config_.vision_weight));
    const Matrix proj = random_projection(fused_items_.cols(), config_.dim, derive_seed(seed, 100));
    projected_users_ = matmul(fused_users_, proj);
    projected_items_ = matmul(fused_items_, proj);
  } else if (config_.bma_plug) {
    throw ConfigError("bma_plug on LightGCN needs modal features");
  }
}

LightGcnBaseline::Nodes LightGcnBaseline::forward(Tape& tape) {
  Nodes n{};
  n.user_embedding = tape.param(params_.at("user_embedding"));
  n.item_embedding = tape.param(params_.at("item_embedding"));
  n.behavior = behavior_forward(tape, inputs_->graph.adjacency, tape.vstack(n.user_embedding, n.item_embedding),
                                config_.layers, inputs_->num_users);
  if (!projected_items_.empty()) {
    n.modal = {tape.constant(projected_users_), tape.constant(projected_items_)};
  }
  return n;
}

LossTerms LightGcnBaseline::batch_loss(Tape& tape, const BatchTriples& batch) {
  const Nodes n = forward(tape);
  const std::pair<NodeId, NodeId> l2[] = {{n.user_embedding, n.item_embedding}};
  return host_loss(tape, n.behavior.user, n.behavior.item, l2, n.behavior, n.modal, batch, weights_,
                   config_.bma_plug);
}

DualRepresentations LightGcnBaseline::represent() {
  Tape tape;
  const Nodes n = forward(tape);
  DualRepresentations r;
  r.behavior_user = to_tensor(tape, n.behavior.user);
  r.behavior_item = to_tensor(tape, n.behavior.item);
  r.modal_user = Tensor2D::cast(projected_users_);
  r.modal_item = Tensor2D::cast(projected_items_);
  r.general_user = r.behavior_user;
  r.general_item = r.behavior_item;
  return r;
}

// ---------------------------------------------------------------- VBPR

VbprBaseline::VbprBaseline(std::shared_ptr<const ModelInputs> inputs, BaselineConfig config, LossWeights weights,
                           std::uint64_t seed)
    : inputs_(std::move(inputs)), config_(config), weights_(weights) {
  weights_.validate();
  if (inputs_->modalities.empty()) throw ConfigError("VBPR needs modal features");
  item_features_ = hconcat_features(*inputs_, &ModalSource::item_features);
  std::tie(fused_users_, fused_items_) = fuse_raw_features(*inputs_, baseline_fusion(*inputs_, config_.vision_weight));
  const std::size_t d = config_.dim;
  params_.add("user_gamma", xavier_init(inputs_->num_users, d, derive_seed(seed, 0)));
  params_.add("item_gamma", xavier_init(inputs_->num_items, d, derive_seed(seed, 1)));
  params_.add("user_theta", xavier_init(inputs_->num_users, d, derive_seed(seed, 2)));
  params_.add("feature_projection", xavier_init(item_features_.cols(), d, derive_seed(seed, 3)));
}

VbprBaseline::Nodes VbprBaseline::forward(Tape& tape) {
  Nodes n{};
  n.user_gamma = tape.param(params_.at("user_gamma"));
  n.item_gamma = tape.param(params_.at("item_gamma"));
  const NodeId theta = tape.param(params_.at("user_theta"));
  const NodeId visual = tape.matmul_const(item_features_, tape.param(params_.at("feature_projection")));
  n.behavior = {n.user_gamma, n.item_gamma};
  n.modal = {theta, visual};
  n.general = {tape.hstack(n.user_gamma, theta), tape.hstack(n.item_gamma, visual)};
  return n;
}

LossTerms VbprBaseline::batch_loss(Tape& tape, const BatchTriples& batch) {
  const Nodes n = forward(tape);
  const std::pair<NodeId, NodeId> l2[] = {{n.general.user, n.general.item}};
  return host_loss(tape, n.general.user, n.general.item, l2, n.behavior, n.modal, batch, weights_,
                   config_.bma_plug);
}

DualRepresentations VbprBaseline::represent() {
  Tape tape;
  const Nodes n = forward(tape);
  DualRepresentations r;
  r.behavior_user = to_tensor(tape, n.behavior.user);
  r.behavior_item = to_tensor(tape, n.behavior.item);
  r.modal_user = to_tensor(tape, n.modal.user);
  r.modal_item = to_tensor(tape, n.modal.item);
  r.general_user = to_tensor(tape, n.general.user);
  r.general_item = to_tensor(tape, n.general.item);
  return r;
}

}  // namespace dream
