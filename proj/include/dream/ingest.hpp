#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dream/tensor.hpp"

namespace dream {

enum class Modality { Vision, Text };

inline constexpr std::array<Modality, 2> kModalities{Modality::Vision, Modality::Text};

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

/// Interactions with dense 0-based indices plus the raw id of every index.
struct InteractionLog {
  std::vector<Interaction> interactions;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  std::size_t num_users() const noexcept { return user_ids.size(); }
  std::size_t num_items() const noexcept { return item_ids.size(); }
};

/// Reads `user<TAB>item[<TAB>...]` lines. Blank lines are skipped, extra
/// columns ignored, duplicates dropped; indices follow first appearance.
InteractionLog load_interactions(const std::filesystem::path& path);

struct KcoreResult {
  std::vector<Interaction> interactions;
  /// new index -> index in the input numbering
  std::vector<std::uint32_t> user_map;
  std::vector<std::uint32_t> item_map;
};

/// Iteratively drops users and items with degree < k, then reindexes the
/// survivors densely (preserving relative order). Throws DataError when
/// nothing survives.
KcoreResult kcore_filter(std::span<const Interaction> interactions, std::size_t k);

/// Applies a k-core result to an interaction log, carrying raw ids along.
InteractionLog apply_kcore(const InteractionLog& log, const KcoreResult& core);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct Splits {
  std::vector<Interaction> train;
  std::vector<Interaction> val;
  std::vector<Interaction> test;
};

// Per-user random split: val and test each get floor(n * ratio) of a user's
// items, the rest go to train. Users left with no training item keep all
// of their items in train (with a warning). Held-out interactions on items
// that never occur in train are moved back into train.
Splits split_dataset(std::span<const Interaction> interactions, std::size_t num_users,
                     const SplitRatios& ratios, std::uint64_t seed);

void save_split_manifest(const std::filesystem::path& path, const Splits& splits, std::size_t num_users,
                         std::size_t num_items);
Splits load_split_manifest(const std::filesystem::path& path, std::size_t* num_users = nullptr,
                           std::size_t* num_items = nullptr);

struct ModalFeatureMatrix {
  Modality modality = Modality::Vision;
  Tensor2D data;

  std::size_t rows() const noexcept { return data.rows(); }
  std::size_t dim() const noexcept { return data.cols(); }
};

/// Reads `<stem>.f32` (little-endian float32, row-major) and the `<stem>.json`
/// sidecar `{rows, dim, modality}`.
ModalFeatureMatrix load_features(const std::filesystem::path& stem);
/// Comma-separated rows of floats, one row per line.
ModalFeatureMatrix load_features_csv(const std::filesystem::path& path, Modality modality);
void save_features(const std::filesystem::path& stem, const ModalFeatureMatrix& features);

/// Reorders feature rows into dense item order. Raw item ids must be
/// non-negative integers addressing feature rows.
ModalFeatureMatrix align_item_features(const ModalFeatureMatrix& raw, std::span<const std::string> item_ids);

/// Row u = mean of the feature rows of u's training items. Users without
/// training items get a zero row and a warning.
ModalFeatureMatrix derive_user_features(std::span<const Interaction> train, std::size_t num_users,
                                        const ModalFeatureMatrix& item_features);

struct Dataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  Splits splits;
  std::map<Modality, ModalFeatureMatrix> item_features;
  std::map<Modality, ModalFeatureMatrix> user_features;
};

}  // namespace dream
