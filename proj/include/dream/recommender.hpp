#pragma once

#include <string>

#include "dream/autodiff.hpp"
#include "dream/objectives.hpp"
#include "dream/params.hpp"

namespace dream {

// Per-user and per-item representations of both lines. For DREAM,
// general = behavior + modal; host baselines fill general with whatever
// their scoring function takes the inner product of.
struct DualRepresentations {
  Tensor2D behavior_user;
  Tensor2D behavior_item;
  Tensor2D modal_user;
  Tensor2D modal_item;
  Tensor2D general_user;
  Tensor2D general_item;
};

struct LossTerms {
  NodeId total = 0;
  LossBreakdown breakdown;
};

class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual std::string kind() const = 0;
  virtual ParamStore& params() = 0;

  /// Records the full training loss for one batch on `tape`.
  virtual LossTerms batch_loss(Tape& tape, const BatchTriples& batch) = 0;

  /// Forward pass with the current parameters (no gradient tracking needed).
  virtual DualRepresentations represent() = 0;

  /// Original modal features fused with the model's modality weights
  /// (items, users); empty when the model uses no modal features.
  virtual const Matrix& fused_raw_items() const = 0;
  virtual const Matrix& fused_raw_users() const = 0;
};

}  // namespace dream
