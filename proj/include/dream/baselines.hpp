#pragma once

#include <memory>

#include "dream/model.hpp"

namespace dream {

struct BaselineConfig {
  std::size_t dim = 64;
  int layers = 2;  // LightGCN only
  double vision_weight = 0.3;
  /// Attach the behaviour-modal alignment plug (alpha, beta of the weights).
  bool bma_plug = false;
};

// LightGCN trained with BPR. Its modal domain is the fused original
// features pushed through a frozen random map into the embedding space;
// that domain only matters when the alignment plug is attached.
class LightGcnBaseline final : public Recommender {
 public:
  LightGcnBaseline(std::shared_ptr<const ModelInputs> inputs, BaselineConfig config, LossWeights weights,
                   std::uint64_t seed);

  std::string kind() const override { return "lightgcn"; }
  ParamStore& params() override { return params_; }
  LossTerms batch_loss(Tape& tape, const BatchTriples& batch) override;
  DualRepresentations represent() override;
  const Matrix& fused_raw_items() const override { return fused_items_; }
  const Matrix& fused_raw_users() const override { return fused_users_; }

 private:
  struct Nodes {
    NodeId user_embedding;
    NodeId item_embedding;
    LinePair behavior;
    LinePair modal;
  };
  Nodes forward(Tape& tape);

  std::shared_ptr<const ModelInputs> inputs_;
  BaselineConfig config_;
  LossWeights weights_;
  ParamStore params_;
  Matrix fused_users_;
  Matrix fused_items_;
  Matrix projected_users_;
  Matrix projected_items_;
};

// VBPR-style model: score = g_u.g_i + t_u.(f_i E) with f_i the concatenated
// modal features of item i and E a learned projection. The behaviour domain
// is (g_u, g_i), the modal domain (t_u, f_i E). Bias terms are omitted; the
// L2 term covers the full concatenated user and item rows.
class VbprBaseline final : public Recommender {
 public:
  VbprBaseline(std::shared_ptr<const ModelInputs> inputs, BaselineConfig config, LossWeights weights,
               std::uint64_t seed);

  std::string kind() const override { return "vbpr"; }
  ParamStore& params() override { return params_; }
  LossTerms batch_loss(Tape& tape, const BatchTriples& batch) override;
  DualRepresentations represent() override;
  const Matrix& fused_raw_items() const override { return fused_items_; }
  const Matrix& fused_raw_users() const override { return fused_users_; }

 private:
  struct Nodes {
    NodeId user_gamma;
    NodeId item_gamma;
    LinePair behavior;
    LinePair modal;
    LinePair general;
  };
  Nodes forward(Tape& tape);

  std::shared_ptr<const ModelInputs> inputs_;
  BaselineConfig config_;
  LossWeights weights_;
  ParamStore params_;
  Matrix item_features_;  // concatenated modalities
  Matrix fused_users_;
  Matrix fused_items_;
};

}  // namespace dream
