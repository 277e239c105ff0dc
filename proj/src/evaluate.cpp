#include "dream/evaluate.hpp"

#include <chrono>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "dream/binary_io.hpp"

namespace dream {

namespace {

std::vector<std::vector<std::uint32_t>> group_by_user(std::span<const Interaction> xs, std::size_t num_users) {
  std::vector<std::vector<std::uint32_t>> out(num_users);
  for (const auto& x : xs) {
    if (x.user >= num_users) throw DimensionError("evaluation interaction user out of range");
    out[x.user].push_back(x.item);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

template <typename RowFn>
EvalReport evaluate_rows(std::size_t num_users, std::size_t num_items, RowFn&& row_scores,
                         std::span<const Interaction> relevant, std::span<const Interaction> train,
                         std::span<const std::size_t> ks, bool mask) {
  const auto start = std::chrono::steady_clock::now();
  if (ks.empty()) throw ConfigError("evaluate: empty K list");
  for (const auto& x : relevant) {
    if (x.item >= num_items) throw DimensionError("evaluation interaction item out of range");
  }
  const auto rel = group_by_user(relevant, num_users);
  const auto seen = group_by_user(train, num_users);
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());

  EvalReport report;
  std::vector<double> recall_sum(ks.size(), 0.0), ndcg_sum(ks.size(), 0.0);
  std::vector<double> scores(num_items);
  for (std::size_t u = 0; u < num_users; ++u) {
    if (rel[u].empty()) continue;
    row_scores(u, scores);
    const auto ranked = top_k(scores, max_k, mask ? std::span<const std::uint32_t>(seen[u]) : std::span<const std::uint32_t>{});
    for (std::size_t q = 0; q < ks.size(); ++q) {
      const std::size_t k = std::min(ks[q], ranked.size());
      std::size_t hits = 0;
      double dcg = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        if (std::binary_search(rel[u].begin(), rel[u].end(), static_cast<std::uint32_t>(ranked[r]))) {
          ++hits;
          dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
      }
      double idcg = 0.0;
      for (std::size_t r = 0; r < std::min(ks[q], rel[u].size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      recall_sum[q] += static_cast<double>(hits) / static_cast<double>(rel[u].size());
      ndcg_sum[q] += dcg / idcg;
    }
    ++report.users_evaluated;
  }
  for (std::size_t q = 0; q < ks.size(); ++q) {
    const double n = std::max<std::size_t>(report.users_evaluated, 1);
    report.recall[ks[q]] = recall_sum[q] / n;
    report.ndcg[ks[q]] = ndcg_sum[q] / n;
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k, std::span<const std::uint32_t> masked) {
  std::vector<std::size_t> idx;
  idx.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!masked.empty() && std::binary_search(masked.begin(), masked.end(), static_cast<std::uint32_t>(i))) continue;
    idx.push_back(i);
  }
  const std::size_t keep = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
  idx.resize(keep);
  return idx;
}

EvalReport evaluate_scores(const Matrix& scores, std::span<const Interaction> relevant,
                           std::span<const Interaction> train, std::span<const std::size_t> ks, bool mask) {
  return evaluate_rows(
      scores.rows(), scores.cols(),
      [&](std::size_t u, std::vector<double>& out) { std::copy(scores.row(u).begin(), scores.row(u).end(), out.begin()); },
      relevant, train, ks, mask);
}

EvalReport evaluate(const Tensor2D& user_reps, const Tensor2D& item_reps, std::span<const Interaction> relevant,
                    std::span<const Interaction> train, std::span<const std::size_t> ks, bool mask) {
  if (user_reps.cols() != item_reps.cols()) {
    throw DimensionError(fmt::format("evaluate: user dim {} != item dim {}", user_reps.cols(), item_reps.cols()));
  }
  return evaluate_rows(
      user_reps.rows(), item_reps.rows(),
      [&](std::size_t u, std::vector<double>& out) {
        for (std::size_t i = 0; i < item_reps.rows(); ++i) out[i] = dot(user_reps.row(u), item_reps.row(i));
      },
      relevant, train, ks, mask);
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["split"] = report.split;
  j["epoch"] = report.epoch;
  j["users_evaluated"] = report.users_evaluated;
  for (const auto& [k, v] : report.recall) j["recall"][std::to_string(k)] = v;
  for (const auto& [k, v] : report.ndcg) j["ndcg"][std::to_string(k)] = v;
  j["wall_seconds"] = report.wall_seconds;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.split = j.at("split").get<std::string>();
    r.epoch = j.at("epoch").get<std::size_t>();
    r.users_evaluated = j.at("users_evaluated").get<std::size_t>();
    for (const auto& [k, v] : j.at("recall").items()) r.recall[std::stoul(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("ndcg").items()) r.ndcg[std::stoul(k)] = v.get<double>();
    r.wall_seconds = j.value("wall_seconds", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed evaluation report: {}", e.what()));
  }
  return r;
}

void append_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  const bool fresh = !std::filesystem::exists(path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  if (fresh) {
    out << "split,epoch";
    for (const auto& [k, v] : report.recall) out << ",recall@" << k;
    for (const auto& [k, v] : report.ndcg) out << ",ndcg@" << k;
    out << '\n';
  }
  out << report.split << ',' << report.epoch;
  for (const auto& [k, v] : report.recall) out << fmt::format(",{:.6f}", v);
  for (const auto& [k, v] : report.ndcg) out << fmt::format(",{:.6f}", v);
  out << '\n';
}

}  // namespace dream
