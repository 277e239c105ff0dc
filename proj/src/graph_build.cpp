#include "dream/graph_build.hpp"

#include <fmt/format.h>

#include "dream/log.hpp"

namespace dream {

NormalizedBipartiteGraph build_normalized_adjacency(std::span<const Interaction> train, std::size_t num_users,
                                                    std::size_t num_items) {
  std::vector<std::size_t> udeg(num_users, 0), ideg(num_items, 0);
  for (const auto& x : train) {
    if (x.user >= num_users || x.item >= num_items) {
      throw DimensionError(fmt::format("interaction ({}, {}) outside {} users x {} items", x.user, x.item,
                                       num_users, num_items));
    }
    ++udeg[x.user];
    ++ideg[x.item];
  }
  std::vector<SparseEntry> entries;
  entries.reserve(2 * train.size());
  const auto offset = static_cast<std::uint32_t>(num_users);
  for (const auto& x : train) {
    const auto w = static_cast<float>(1.0 / std::sqrt(static_cast<double>(udeg[x.user]) *
                                                      static_cast<double>(ideg[x.item])));
    entries.push_back({x.user, offset + x.item, w});
    entries.push_back({offset + x.item, x.user, w});
  }
  const std::size_t n = num_users + num_items;
  return {num_users, num_items, SparseMatrix::from_entries(n, n, std::move(entries))};
}

std::vector<std::vector<std::uint32_t>> knn_by_cosine(const Tensor2D& features, std::size_t k) {
  const std::size_t n = features.rows();
  const std::size_t dim = features.cols();
  std::vector<double> values(features.data().begin(), features.data().end());
  std::vector<double> len(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) len[r] = norm(std::span<const double>(values.data() + r * dim, dim));

  std::vector<std::vector<std::uint32_t>> neighbours(n);
  std::vector<std::pair<double, std::uint32_t>> cand;
  for (std::size_t r = 0; r < n; ++r) {
    if (len[r] == 0.0) continue;
    cand.clear();
    const std::span<const double> a(values.data() + r * dim, dim);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == r || len[j] == 0.0) continue;
      const double s = dot(a, std::span<const double>(values.data() + j * dim, dim)) / (len[r] * len[j]);
      cand.emplace_back(s, static_cast<std::uint32_t>(j));
    }
    const std::size_t keep = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    auto& out = neighbours[r];
    for (std::size_t q = 0; q < keep; ++q) out.push_back(cand[q].second);
    std::sort(out.begin(), out.end());
  }
  return neighbours;
}

RelationGraph build_relation_graph(const ModalFeatureMatrix& features, GraphScope scope,
                                   const RelationGraphOptions& options) {
  const std::size_t n = features.rows();
  if (options.k == 0) throw ConfigError("relation graph k must be >= 1");
  if (n < 2) throw DataError(fmt::format("cannot build a relation graph over {} row(s)", n));
  std::size_t k = options.k;
  if (k >= n) {
    warn(fmt::format("relation graph k={} >= {} rows; using k={}", k, n, n - 1));
    k = n - 1;
  }

  auto neighbours = knn_by_cosine(features.data, k);
  std::size_t isolated = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const bool zero_row = norm(features.data.row(r)) == 0.0;
    if (zero_row) ++isolated;
    if (options.self_loop && !zero_row) {
      auto& nb = neighbours[r];
      nb.insert(std::lower_bound(nb.begin(), nb.end(), static_cast<std::uint32_t>(r)), static_cast<std::uint32_t>(r));
    }
  }
  if (isolated > 0) {
    warn(fmt::format("{} all-zero {} feature row(s) have no relation-graph neighbours", isolated,
                     to_string(features.modality)));
  }

  // D_ii = sum_j S_hat_ij; zero degree maps to a zero inverse square root.
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (!neighbours[r].empty()) inv_sqrt[r] = 1.0 / std::sqrt(static_cast<double>(neighbours[r].size()));
  }
  std::vector<SparseEntry> entries;
  for (std::size_t r = 0; r < n; ++r) {
    for (auto j : neighbours[r]) {
      entries.push_back({static_cast<std::uint32_t>(r), j, static_cast<float>(inv_sqrt[r] * inv_sqrt[j])});
    }
  }
  return {features.modality, scope, k, SparseMatrix::from_entries(n, n, std::move(entries))};
}

}  // namespace dream
