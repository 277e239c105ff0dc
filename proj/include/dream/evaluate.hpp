#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dream/ingest.hpp"
#include "dream/tensor.hpp"

namespace dream {

struct EvalReport {
  std::string split;
  std::map<std::size_t, double> recall;  // K -> mean Recall@K
  std::map<std::size_t, double> ndcg;    // K -> mean NDCG@K
  std::size_t users_evaluated = 0;
  std::size_t epoch = 0;
  double wall_seconds = 0.0;
};

// Full-ranking top-K evaluation. For every user with at least one relevant
// item in `relevant`, all items are ranked by score (ties to the lower item
// index); with `mask` set, items the user has in `train` are excluded from
// the ranking. Recall@K = hits / |relevant|; NDCG@K uses binary gain with
// discount 1/log2(rank + 1), normalised by the ideal DCG. Means are taken
// over evaluated users.
EvalReport evaluate_scores(const Matrix& scores, std::span<const Interaction> relevant,
                           std::span<const Interaction> train, std::span<const std::size_t> ks, bool mask = true);

/// Scores are inner products of user and item representation rows.
EvalReport evaluate(const Tensor2D& user_reps, const Tensor2D& item_reps, std::span<const Interaction> relevant,
                    std::span<const Interaction> train, std::span<const std::size_t> ks, bool mask = true);

/// Indices of the top-k items of one score row, best first, skipping masked items.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k, std::span<const std::uint32_t> masked);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Appends `report` as one CSV row (split, epoch, recall@K..., ndcg@K...),
/// writing the header first when the file is new.
void append_report_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace dream
