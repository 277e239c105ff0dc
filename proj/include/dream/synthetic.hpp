#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dream/ingest.hpp"

namespace dream {

// Block-preference data: users and items are assigned round-robin to latent
// blocks; a user's interactions fall in its own block with probability
// `in_block`, otherwise on a uniform random item. Each modality's item
// feature is the block one-hot (at a modality-specific dimension offset)
// plus Gaussian noise.
struct SyntheticSpec {
  std::size_t users = 200;
  std::size_t items = 150;
  std::size_t blocks = 5;
  std::size_t dim = 12;
  std::size_t min_per_user = 6;
  std::size_t max_per_user = 10;
  double in_block = 0.85;
  double vision_noise = 0.5;
  double text_noise = 0.3;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<Interaction> interactions;  // sorted, deduplicated
  ModalFeatureMatrix vision;
  ModalFeatureMatrix text;
  std::vector<std::size_t> user_block;
  std::vector<std::size_t> item_block;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Writes interactions.tsv (user ids "u<index>", item ids "<index>"),
/// vision.{f32,json} and text.{f32,json} into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data);

}  // namespace dream
