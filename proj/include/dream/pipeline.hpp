#pragma once

#include <filesystem>
#include <memory>

#include "dream/config.hpp"
#include "dream/recommender.hpp"

namespace dream {

struct PreparedData {
  Dataset dataset;
  std::shared_ptr<const ModelInputs> inputs;
  std::filesystem::path cache_entry;  // directory of the data-level cache
  std::filesystem::path graph_entry;  // relation graphs for the configured k
  bool reused_data = false;
  bool reused_graphs = false;
};

/// Content hash of everything the data-level cache depends on: the raw
/// files and the k-core / split settings.
std::string data_cache_key(const DataConfig& data);

/// Loads, filters, splits and featurises the raw data and builds all graphs,
/// or reuses the cache entry for identical inputs. Relation graphs live in a
/// per-k subdirectory so changing k keeps older graphs.
PreparedData prepare(const RunConfig& config);

/// Instantiates the configured model (after ablations) over prepared inputs.
std::unique_ptr<Recommender> build_model(const RunConfig& config, const PreparedData& data);

}  // namespace dream
