#include "dream/objectives.hpp"

#include <fmt/format.h>

namespace dream {

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || lambda < 0) throw ConfigError("loss weights must be >= 0");
  if (!(tau > 0)) throw ConfigError("temperature tau must be > 0");
}

NodeId bpr_loss(Tape& tape, NodeId general_user, NodeId general_item, const BatchTriples& batch) {
  if (batch.size() == 0) throw ConfigError("bpr_loss: empty batch");
  const NodeId u = tape.gather_rows(general_user, batch.users);
  const NodeId pos = tape.row_dot(u, tape.gather_rows(general_item, batch.pos_items));
  const NodeId neg = tape.row_dot(u, tape.gather_rows(general_item, batch.neg_items));
  return tape.bpr(pos, neg);
}

NodeId infonce(Tape& tape, NodeId anchors, NodeId positives, double tau, bool normalize) {
  const auto& a = tape.value(anchors);
  const auto& p = tape.value(positives);
  if (a.rows() < 2) throw ConfigError(fmt::format("infonce: degenerate batch of size {}", a.rows()));
  if (!a.same_shape(p)) {
    throw DimensionError(fmt::format("infonce: anchors {}x{} vs positives {}x{}", a.rows(), a.cols(), p.rows(), p.cols()));
  }
  if (normalize) {
    anchors = tape.normalize_rows(anchors);
    positives = tape.normalize_rows(positives);
  }
  return tape.softmax_xent_diag(tape.matmul_nt(anchors, positives), 1.0 / tau);
}

NodeId similarity_supervision(Tape& tape, NodeId learned, const Matrix& raw, bool normalize) {
  if (tape.value(learned).rows() < 2) throw ConfigError("s3_loss: degenerate batch");
  if (tape.value(learned).rows() != raw.rows()) throw DimensionError("s3_loss: row counts differ");
  const Matrix raw_rows = normalize ? normalize_rows(raw) : raw;
  const NodeId target = tape.stop_gradient(tape.constant(dream::matmul_nt(raw_rows, raw_rows)));
  const NodeId rows = normalize ? tape.normalize_rows(learned) : learned;
  return tape.mse(tape.matmul_nt(rows, rows), target);
}

NodeId s3_loss(Tape& tape, NodeId modal_user, NodeId modal_item, const Matrix& fused_raw_user,
               const Matrix& fused_raw_item, const BatchTriples& batch, bool normalize) {
  const NodeId items = similarity_supervision(tape, tape.gather_rows(modal_item, batch.pos_items),
                                              select_rows(fused_raw_item, batch.pos_items), normalize);
  const NodeId users = similarity_supervision(tape, tape.gather_rows(modal_user, batch.users),
                                              select_rows(fused_raw_user, batch.users), normalize);
  return tape.weighted_sum({{items, 1.0}, {users, 1.0}});
}

AlignmentNodes alignment_terms(Tape& tape, NodeId behavior_user, NodeId behavior_item, NodeId modal_user,
                               NodeId modal_item, const BatchTriples& batch, const LossWeights& w) {
  const NodeId bu = tape.gather_rows(behavior_user, batch.users);
  const NodeId bi = tape.gather_rows(behavior_item, batch.pos_items);
  const NodeId mu = tape.gather_rows(modal_user, batch.users);
  const NodeId mi = tape.gather_rows(modal_item, batch.pos_items);
  AlignmentNodes out{};
  out.bia = infonce(tape, bu, bi, w.tau, w.normalize);
  out.mia = infonce(tape, mu, mi, w.tau, w.normalize);
  out.inter = tape.weighted_sum(
      {{infonce(tape, bu, mu, w.tau, w.normalize), 1.0}, {infonce(tape, bi, mi, w.tau, w.normalize), 1.0}});
  return out;
}

NodeId embedding_l2(Tape& tape, NodeId user_embedding, NodeId item_embedding, const BatchTriples& batch) {
  return tape.weighted_sum({{tape.mean_row_sq_norm(tape.gather_rows(user_embedding, batch.users)), 1.0},
                            {tape.mean_row_sq_norm(tape.gather_rows(item_embedding, batch.pos_items)), 1.0},
                            {tape.mean_row_sq_norm(tape.gather_rows(item_embedding, batch.neg_items)), 1.0}});
}

LossBreakdown total_loss(const LossParts& parts, const LossWeights& w) {
  const std::pair<const char*, double> named[] = {{"general", parts.general}, {"bia", parts.bia},
                                                  {"mia", parts.mia},         {"inter", parts.inter},
                                                  {"s3", parts.s3},           {"reg", parts.l2}};
  for (auto [name, v] : named) {
    if (!std::isfinite(v)) throw NumericError(fmt::format("non-finite loss term '{}'", name));
  }
  LossBreakdown b;
  b.general = parts.general;
  b.bia = parts.bia;
  b.mia = parts.mia;
  b.intra = parts.bia + parts.mia;
  b.inter = parts.inter;
  b.s3 = parts.s3;
  b.reg = w.lambda * parts.l2;
  b.total = b.general + w.alpha * b.intra + w.beta * b.inter + w.gamma * b.s3 + b.reg;
  return b;
}

NodeId bma_plug(Tape& tape, NodeId behavior_user, NodeId behavior_item, NodeId modal_user, NodeId modal_item,
                const BatchTriples& batch, const LossWeights& w, AlignmentNodes* terms_out) {
  const auto& bu = tape.value(behavior_user);
  const auto& mu = tape.value(modal_user);
  const auto& bi = tape.value(behavior_item);
  const auto& mi = tape.value(modal_item);
  if (bu.cols() != mu.cols() || bi.cols() != mi.cols() || bu.cols() != bi.cols()) {
    throw ConfigError(fmt::format("bma_plug: representation dims differ (behavior {}/{}, modal {}/{})", bu.cols(),
                                  bi.cols(), mu.cols(), mi.cols()));
  }
  if (w.alpha == 0.0 && w.beta == 0.0) return tape.constant(Matrix(1, 1, 0.0));
  const auto terms = alignment_terms(tape, behavior_user, behavior_item, modal_user, modal_item, batch, w);
  if (terms_out != nullptr) *terms_out = terms;
  return tape.weighted_sum({{terms.bia, w.alpha}, {terms.mia, w.alpha}, {terms.inter, w.beta}});
}

double bpr_value(const Matrix& general_user, const Matrix& general_item, const BatchTriples& batch) {
  Tape tape;
  return tape.scalar(bpr_loss(tape, tape.constant(general_user), tape.constant(general_item), batch));
}

double infonce_value(const Matrix& anchors, const Matrix& positives, double tau, bool normalize) {
  Tape tape;
  return tape.scalar(infonce(tape, tape.constant(anchors), tape.constant(positives), tau, normalize));
}

double s3_value(const Matrix& modal_user, const Matrix& modal_item, const Matrix& fused_raw_user,
                const Matrix& fused_raw_item, const BatchTriples& batch, bool normalize) {
  Tape tape;
  return tape.scalar(s3_loss(tape, tape.constant(modal_user), tape.constant(modal_item), fused_raw_user,
                             fused_raw_item, batch, normalize));
}

}  // namespace dream
