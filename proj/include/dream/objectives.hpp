#pragma once

#include <cstdint>
#include <vector>

#include "dream/autodiff.hpp"

namespace dream {

struct LossWeights {
  double alpha = 0.01;   // intra-alignment
  double beta = 0.01;    // inter-alignment
  double gamma = 0.1;    // similarity supervision (S3)
  double lambda = 1e-4;  // L2 on the batch's ID-embedding rows
  double tau = 0.2;      // InfoNCE temperature
  /// Cosine instead of raw dot products inside InfoNCE and S3.
  bool normalize = true;

  void validate() const;
};

struct LossBreakdown {
  double general = 0.0;
  double bia = 0.0;
  double mia = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double s3 = 0.0;
  double reg = 0.0;  // already multiplied by lambda
  double total = 0.0;
};

struct BatchTriples {
  std::vector<std::size_t> users;
  std::vector<std::size_t> pos_items;
  std::vector<std::size_t> neg_items;

  std::size_t size() const noexcept { return users.size(); }
};

/// Mean over triples of -log sigmoid(g_u.g_i - g_u.g_j), sigmoid clamped at 1e-12.
NodeId bpr_loss(Tape& tape, NodeId general_user, NodeId general_item, const BatchTriples& batch);

/// In-batch InfoNCE: row j of `positives` is the positive for row j of
/// `anchors`, every other row of `positives` a negative. Mean over anchors.
NodeId infonce(Tape& tape, NodeId anchors, NodeId positives, double tau, bool normalize = true);

/// MSE between the BxB similarity matrix of `learned` rows and that of the
/// raw fused feature rows, the latter held constant.
NodeId similarity_supervision(Tape& tape, NodeId learned, const Matrix& raw, bool normalize = true);

/// Item-side plus user-side similarity supervision over the batch's users
/// and positive items.
NodeId s3_loss(Tape& tape, NodeId modal_user, NodeId modal_item, const Matrix& fused_raw_user,
               const Matrix& fused_raw_item, const BatchTriples& batch, bool normalize = true);

struct AlignmentNodes {
  NodeId bia;
  NodeId mia;
  NodeId inter;
};

/// BIA, MIA and inter-alignment InfoNCE terms over the batch's users and
/// positive items.
AlignmentNodes alignment_terms(Tape& tape, NodeId behavior_user, NodeId behavior_item, NodeId modal_user,
                               NodeId modal_item, const BatchTriples& batch, const LossWeights& w);

/// Raw (unweighted) L2 term: mean over triples of |e_u|^2 + |e_i|^2 + |e_j|^2
/// on the layer-0 ID embeddings.
NodeId embedding_l2(Tape& tape, NodeId user_embedding, NodeId item_embedding, const BatchTriples& batch);

struct LossParts {
  double general = 0.0;
  double bia = 0.0;
  double mia = 0.0;
  double inter = 0.0;
  double s3 = 0.0;
  double l2 = 0.0;  // unweighted
};

/// general + alpha*(bia + mia) + beta*inter + gamma*s3 + lambda*l2.
/// Throws NumericError naming the first non-finite part.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& w);

/// The behaviour-modal alignment plug for host models:
/// alpha * (BIA + MIA) + beta * Inter on the host's two representation
/// domains. Returns a 1x1 node; the host's own loss is not touched. The
/// individual terms are reported through `terms` when given.
NodeId bma_plug(Tape& tape, NodeId behavior_user, NodeId behavior_item, NodeId modal_user, NodeId modal_item,
                const BatchTriples& batch, const LossWeights& w, AlignmentNodes* terms = nullptr);

// Value-only conveniences (record on a private tape).
double bpr_value(const Matrix& general_user, const Matrix& general_item, const BatchTriples& batch);
double infonce_value(const Matrix& anchors, const Matrix& positives, double tau, bool normalize = true);
double s3_value(const Matrix& modal_user, const Matrix& modal_item, const Matrix& fused_raw_user,
                const Matrix& fused_raw_item, const BatchTriples& batch, bool normalize = true);

}  // namespace dream
