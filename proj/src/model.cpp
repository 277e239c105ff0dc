#include "dream/model.hpp"

#include <fmt/format.h>

namespace dream {

void ModalLineConfig::validate() const {
  if (layers < 0) throw ConfigError("modal layers must be >= 0");
  if (vision_weight < 0.0 || vision_weight > 1.0) throw ConfigError("vision weight must lie in [0, 1]");
  if (knn_k == 0) throw ConfigError("relation graph k must be >= 1");
  if (enabled && !vision && !text) throw ConfigError("both modalities disabled");
}

const ModalSource* ModelInputs::find(Modality m) const {
  for (const auto& s : modalities) {
    if (s.modality == m) return &s;
  }
  return nullptr;
}

FusionWeights fusion_weights(const ModalLineConfig& cfg, const ModelInputs& inputs) {
  const bool v = cfg.vision && inputs.find(Modality::Vision) != nullptr;
  const bool t = cfg.text && inputs.find(Modality::Text) != nullptr;
  if (!v && !t) throw ConfigError("no enabled modality has features");
  if (v && t) return {cfg.vision_weight, 1.0 - cfg.vision_weight};
  return v ? FusionWeights{1.0, 0.0} : FusionWeights{0.0, 1.0};
}

std::pair<Matrix, Matrix> fuse_raw_features(const ModelInputs& inputs, const FusionWeights& weights) {
  std::vector<std::pair<const ModalSource*, double>> used;
  for (const auto& s : inputs.modalities) {
    const double w = weights.of(s.modality);
    if (w > 0.0) used.emplace_back(&s, w);
  }
  if (used.empty()) return {};
  const bool same_dim = std::all_of(used.begin(), used.end(), [&](const auto& p) {
    return p.first->item_features.cols() == used.front().first->item_features.cols();
  });

  auto fuse = [&](auto member) {
    const std::size_t rows = (used.front().first->*member).rows();
    if (same_dim) {
      Matrix out(rows, (used.front().first->*member).cols());
      for (auto [src, w] : used) {
        const auto& f = src->*member;
        for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += w * f.data()[k];
      }
      return out;
    }
    std::size_t total = 0;
    for (auto [src, w] : used) total += (src->*member).cols();
    Matrix out(rows, total);
    std::size_t offset = 0;
    for (auto [src, w] : used) {
      const Matrix unit = normalize_rows(src->*member);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < unit.cols(); ++c) out(r, offset + c) = w * unit(r, c);
      }
      offset += unit.cols();
    }
    return out;
  };
  return {fuse(&ModalSource::user_features), fuse(&ModalSource::item_features)};
}

LinePair behavior_forward(Tape& tape, const SparseMatrix& adjacency, NodeId base, int layers,
                          std::size_t num_users) {
  const auto& e0 = tape.value(base);
  if (adjacency.rows() != e0.rows() || adjacency.cols() != e0.rows()) {
    throw DimensionError(fmt::format("behavior_forward: adjacency {}x{} for {} embedding rows", adjacency.rows(),
                                     adjacency.cols(), e0.rows()));
  }
  if (num_users > e0.rows()) throw DimensionError("behavior_forward: more users than embedding rows");
  if (layers < 0) throw ConfigError("behavior layers must be >= 0");
  const std::size_t num_items = e0.rows() - num_users;
  NodeId layer = base;
  NodeId acc = base;
  for (int l = 0; l < layers; ++l) {
    layer = tape.spmm(adjacency, layer);
    acc = tape.add(acc, layer);
  }
  const NodeId mean = layers == 0 ? base : tape.scale(acc, 1.0 / static_cast<double>(layers + 1));
  return {tape.slice_rows(mean, 0, num_users), tape.slice_rows(mean, num_users, num_items)};
}

NodeId filter_gate(Tape& tape, const Matrix& features, NodeId behavior, NodeId weight, NodeId bias) {
  const auto& w = tape.value(weight);
  const auto& b = tape.value(behavior);
  if (features.cols() != w.rows() || w.cols() != b.cols() || features.rows() != b.rows()) {
    throw DimensionError(fmt::format("filter_gate: features {}x{}, W {}x{}, behavior {}x{}", features.rows(),
                                     features.cols(), w.rows(), w.cols(), b.rows(), b.cols()));
  }
  const NodeId gate = tape.sigmoid(tape.add_row_bias(tape.matmul_const(features, weight), bias));
  return tape.hadamard(gate, behavior);
}

namespace {

NodeId propagate(Tape& tape, const SparseMatrix* graph, NodeId x, int layers) {
  if (graph == nullptr) return x;
  for (int l = 0; l < layers; ++l) x = tape.spmm(*graph, x);
  return x;
}

NodeId combine(Tape& tape, std::span<const std::pair<NodeId, double>> terms) {
  NodeId acc = tape.scale(terms[0].first, terms[0].second);
  for (std::size_t k = 1; k < terms.size(); ++k) acc = tape.add(acc, tape.scale(terms[k].first, terms[k].second));
  return acc;
}

}  // namespace

LinePair modal_forward(Tape& tape, std::span<const ModalBranch> branches, int layers) {
  std::vector<std::pair<NodeId, double>> users, items;
  for (const auto& b : branches) {
    if (b.weight == 0.0) continue;
    users.emplace_back(propagate(tape, b.user_graph, b.gated_user, layers), b.weight);
    items.emplace_back(propagate(tape, b.item_graph, b.gated_item, layers), b.weight);
  }
  if (users.empty()) throw ConfigError("modal_forward: both modalities disabled");
  return {combine(tape, users), combine(tape, items)};
}

LinePair general_representation(Tape& tape, LinePair behavior, LinePair modal) {
  return {tape.add(behavior.user, modal.user), tape.add(behavior.item, modal.item)};
}

double score(std::span<const float> user, std::span<const float> item) { return dot(user, item); }

// ---------------------------------------------------------------- DreamModel

DreamModel::DreamModel(std::shared_ptr<const ModelInputs> inputs, ModelConfig config, LossWeights weights,
                       std::uint64_t seed)
    : inputs_(std::move(inputs)), config_(config), weights_(weights) {
  if (config_.behavior.dim == 0) throw ConfigError("embedding dim must be >= 1");
  if (config_.behavior.layers < 0) throw ConfigError("behavior layers must be >= 0");
  config_.modal.validate();
  weights_.validate();
  const std::size_t d = config_.behavior.dim;
  params_.add("user_embedding", xavier_init(inputs_->num_users, d, derive_seed(seed, 0)));
  params_.add("item_embedding", xavier_init(inputs_->num_items, d, derive_seed(seed, 1)));
  if (config_.modal.enabled) {
    fusion_ = fusion_weights(config_.modal, *inputs_);
    std::uint64_t stream = 2;
    for (const auto& src : inputs_->modalities) {
      if (fusion_.of(src.modality) == 0.0) continue;
      const std::string m = to_string(src.modality);
      params_.add("gate_weight_" + m, xavier_init(src.item_features.cols(), d, derive_seed(seed, stream++)));
      params_.add("gate_bias_" + m, Tensor2D(1, d));
    }
    std::tie(fused_users_, fused_items_) = fuse_raw_features(*inputs_, fusion_);
  }
}

DreamNodes DreamModel::forward(Tape& tape) {
  DreamNodes n{};
  n.user_embedding = tape.param(params_.at("user_embedding"));
  n.item_embedding = tape.param(params_.at("item_embedding"));
  const NodeId base = tape.vstack(n.user_embedding, n.item_embedding);
  n.behavior = behavior_forward(tape, inputs_->graph.adjacency, base, config_.behavior.layers, inputs_->num_users);

  if (!config_.modal.enabled) {
    n.general = n.behavior;
    return n;
  }

  const auto& mc = config_.modal;
  LinePair gate_in = mc.gate_input == GateInput::Base ? LinePair{n.user_embedding, n.item_embedding} : n.behavior;
  if (mc.detach_gate_behavior) gate_in = {tape.stop_gradient(gate_in.user), tape.stop_gradient(gate_in.item)};

  std::vector<ModalBranch> branches;
  for (const auto& src : inputs_->modalities) {
    const double w = fusion_.of(src.modality);
    if (w == 0.0) continue;
    const std::string m = to_string(src.modality);
    const NodeId weight = tape.param(params_.at("gate_weight_" + m));
    const NodeId bias = tape.param(params_.at("gate_bias_" + m));
    ModalBranch b;
    b.weight = w;
    if (mc.filter_gate) {
      b.gated_user = filter_gate(tape, src.user_features, gate_in.user, weight, bias);
      b.gated_item = filter_gate(tape, src.item_features, gate_in.item, weight, bias);
    } else {
      // Without the gate the features are only linearly projected.
      b.gated_user = tape.add_row_bias(tape.matmul_const(src.user_features, weight), bias);
      b.gated_item = tape.add_row_bias(tape.matmul_const(src.item_features, weight), bias);
    }
    b.user_graph = mc.user_graph ? &src.user_graph.matrix : nullptr;
    b.item_graph = mc.item_graph ? &src.item_graph.matrix : nullptr;
    branches.push_back(b);
  }
  n.modal = modal_forward(tape, branches, mc.layers);
  n.general = general_representation(tape, n.behavior, *n.modal);
  return n;
}

LossTerms DreamModel::batch_loss(Tape& tape, const BatchTriples& batch) {
  const DreamNodes n = forward(tape);
  const auto& w = weights_;
  std::vector<std::pair<NodeId, double>> terms;
  LossParts parts;

  const NodeId general = bpr_loss(tape, n.general.user, n.general.item, batch);
  parts.general = tape.scalar(general);
  terms.emplace_back(general, 1.0);

  if (w.lambda > 0.0) {
    const NodeId l2 = embedding_l2(tape, n.user_embedding, n.item_embedding, batch);
    parts.l2 = tape.scalar(l2);
    terms.emplace_back(l2, w.lambda);
  }
  if (w.alpha > 0.0) {
    const NodeId bia = infonce(tape, tape.gather_rows(n.behavior.user, batch.users),
                               tape.gather_rows(n.behavior.item, batch.pos_items), w.tau, w.normalize);
    parts.bia = tape.scalar(bia);
    terms.emplace_back(bia, w.alpha);
  }
  if (n.modal) {
    const LinePair modal = *n.modal;
    if (w.alpha > 0.0) {
      const NodeId mia = infonce(tape, tape.gather_rows(modal.user, batch.users),
                                 tape.gather_rows(modal.item, batch.pos_items), w.tau, w.normalize);
      parts.mia = tape.scalar(mia);
      terms.emplace_back(mia, w.alpha);
    }
    if (w.beta > 0.0) {
      const NodeId bu = tape.gather_rows(n.behavior.user, batch.users);
      const NodeId bi = tape.gather_rows(n.behavior.item, batch.pos_items);
      const NodeId inter = tape.weighted_sum(
          {{infonce(tape, bu, tape.gather_rows(modal.user, batch.users), w.tau, w.normalize), 1.0},
           {infonce(tape, bi, tape.gather_rows(modal.item, batch.pos_items), w.tau, w.normalize), 1.0}});
      parts.inter = tape.scalar(inter);
      terms.emplace_back(inter, w.beta);
    }
    if (w.gamma > 0.0) {
      const NodeId s3 = s3_loss(tape, modal.user, modal.item, fused_users_, fused_items_, batch, w.normalize);
      parts.s3 = tape.scalar(s3);
      terms.emplace_back(s3, w.gamma);
    }
  }
  LossTerms out;
  out.breakdown = total_loss(parts, w);
  out.total = tape.weighted_sum(terms);
  return out;
}

DualRepresentations DreamModel::represent() {
  Tape tape;
  const DreamNodes n = forward(tape);
  DualRepresentations r;
  r.behavior_user = Tensor2D::cast(tape.value(n.behavior.user));
  r.behavior_item = Tensor2D::cast(tape.value(n.behavior.item));
  if (n.modal) {
    r.modal_user = Tensor2D::cast(tape.value(n.modal->user));
    r.modal_item = Tensor2D::cast(tape.value(n.modal->item));
  } else {
    r.modal_user = Tensor2D(r.behavior_user.rows(), r.behavior_user.cols());
    r.modal_item = Tensor2D(r.behavior_item.rows(), r.behavior_item.cols());
  }
  // Summed in float so general == behavior + modal holds exactly on the export.
  r.general_user = r.behavior_user;
  r.general_item = r.behavior_item;
  for (std::size_t k = 0; k < r.general_user.size(); ++k) r.general_user.data()[k] += r.modal_user.data()[k];
  for (std::size_t k = 0; k < r.general_item.size(); ++k) r.general_item.data()[k] += r.modal_item.data()[k];
  return r;
}

}  // namespace dream
