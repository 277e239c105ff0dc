#pragma once

#include <span>

#include "dream/ingest.hpp"
#include "dream/sparse.hpp"

namespace dream {

/// D^{-1/2} A D^{-1/2} over the (M+N)x(M+N) user-item bipartite graph;
/// users occupy rows [0, M), items [M, M+N).
struct NormalizedBipartiteGraph {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  SparseMatrix adjacency;
};

NormalizedBipartiteGraph build_normalized_adjacency(std::span<const Interaction> train, std::size_t num_users,
                                                    std::size_t num_items);

enum class GraphScope { ItemItem, UserUser };

struct RelationGraph {
  Modality modality = Modality::Vision;
  GraphScope scope = GraphScope::ItemItem;
  std::size_t k = 0;
  SparseMatrix matrix;
};

struct RelationGraphOptions {
  std::size_t k = 10;
  /// Adds a unit diagonal to the binarised kNN graph before normalisation.
  bool self_loop = false;
};

/// Indices of the k most cosine-similar rows for each row, self excluded,
/// ties broken towards the lower index. Rows with zero norm get no neighbours
/// and are never chosen as neighbours.
std::vector<std::vector<std::uint32_t>> knn_by_cosine(const Tensor2D& features, std::size_t k);

/// Frozen top-k cosine graph, binarised, then w_ij = 1 / sqrt(d_i d_j) with
/// d the row sums (out-degrees) of the binary graph.
RelationGraph build_relation_graph(const ModalFeatureMatrix& features, GraphScope scope,
                                   const RelationGraphOptions& options);

}  // namespace dream
