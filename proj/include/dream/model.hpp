#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dream/graph_build.hpp"
#include "dream/recommender.hpp"

namespace dream {

struct BehaviorLineConfig {
  int layers = 2;
  std::size_t dim = 64;
};

enum class GateInput { Base, Aggregated };

struct ModalLineConfig {
  int layers = 1;
  double vision_weight = 0.3;
  std::size_t knn_k = 10;
  bool self_loop = false;
  bool enabled = true;  // false: the Modal Line is removed entirely
  bool vision = true;
  bool text = true;
  bool filter_gate = true;
  bool item_graph = true;
  bool user_graph = true;
  GateInput gate_input = GateInput::Base;
  /// Blocks gradient through the gate's behaviour-embedding operand.
  bool detach_gate_behavior = false;

  void validate() const;
};

struct ModelConfig {
  BehaviorLineConfig behavior;
  ModalLineConfig modal;
};

/// Frozen inputs of one modality.
struct ModalSource {
  Modality modality = Modality::Vision;
  Matrix item_features;  // N x d_m
  Matrix user_features;  // M x d_m
  RelationGraph item_graph;
  RelationGraph user_graph;
};

struct ModelInputs {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  NormalizedBipartiteGraph graph;
  std::vector<ModalSource> modalities;

  const ModalSource* find(Modality m) const;
};

/// Effective fusion weight per modality after disabling: a disabled or
/// missing modality gets 0 and the other takes its weight.
struct FusionWeights {
  double vision = 0.0;
  double text = 0.0;
  double of(Modality m) const { return m == Modality::Vision ? vision : text; }
};
FusionWeights fusion_weights(const ModalLineConfig& cfg, const ModelInputs& inputs);

/// alpha_V e_V + alpha_T e_T of the original features (users, items). When
/// the two modalities differ in dimensionality, each modality's rows are
/// L2-normalised, scaled by its weight, and concatenated instead.
std::pair<Matrix, Matrix> fuse_raw_features(const ModelInputs& inputs, const FusionWeights& weights);

struct LinePair {
  NodeId user;
  NodeId item;
};

/// LightGCN propagation E^{l+1} = A E^l and the layer mean, split into the
/// first `num_users` rows and the rest.
LinePair behavior_forward(Tape& tape, const SparseMatrix& adjacency, NodeId base, int layers,
                          std::size_t num_users);

/// sigmoid(features * W + b) (.) behavior
NodeId filter_gate(Tape& tape, const Matrix& features, NodeId behavior, NodeId weight, NodeId bias);

struct ModalBranch {
  double weight = 0.0;
  NodeId gated_user = 0;
  NodeId gated_item = 0;
  const SparseMatrix* user_graph = nullptr;  // nullptr: identity
  const SparseMatrix* item_graph = nullptr;
};

/// Relation-graph propagation of every branch followed by weighted fusion.
LinePair modal_forward(Tape& tape, std::span<const ModalBranch> branches, int layers);

LinePair general_representation(Tape& tape, LinePair behavior, LinePair modal);

double score(std::span<const float> user, std::span<const float> item);

/// All nodes of one DREAM forward pass. Modal nodes are absent when the
/// Modal Line is disabled.
struct DreamNodes {
  NodeId user_embedding;
  NodeId item_embedding;
  LinePair behavior;
  std::optional<LinePair> modal;
  LinePair general;
};

class DreamModel final : public Recommender {
 public:
  DreamModel(std::shared_ptr<const ModelInputs> inputs, ModelConfig config, LossWeights weights,
             std::uint64_t seed);

  std::string kind() const override { return "dream"; }
  ParamStore& params() override { return params_; }
  LossTerms batch_loss(Tape& tape, const BatchTriples& batch) override;
  DualRepresentations represent() override;
  const Matrix& fused_raw_items() const override { return fused_items_; }
  const Matrix& fused_raw_users() const override { return fused_users_; }

  DreamNodes forward(Tape& tape);

  const ModelConfig& config() const noexcept { return config_; }
  const LossWeights& weights() const noexcept { return weights_; }
  const ModelInputs& inputs() const noexcept { return *inputs_; }

 private:
  std::shared_ptr<const ModelInputs> inputs_;
  ModelConfig config_;
  LossWeights weights_;
  FusionWeights fusion_;
  ParamStore params_;
  Matrix fused_users_;
  Matrix fused_items_;
};

}  // namespace dream
