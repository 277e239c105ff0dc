#include "dream/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "dream/params.hpp"

namespace dream {

namespace {

ModalFeatureMatrix block_features(const SyntheticSpec& spec, const std::vector<std::size_t>& item_block,
                                  Modality m, double noise, std::size_t offset, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  ModalFeatureMatrix f{m, Tensor2D(spec.items, spec.dim)};
  for (std::size_t i = 0; i < spec.items; ++i) {
    auto row = f.data.row(i);
    for (auto& v : row) v = static_cast<float>(gauss(rng));
    row[(item_block[i] + offset) % spec.dim] += 1.0f;
  }
  return f;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  if (spec.blocks == 0 || spec.blocks > spec.dim) throw ConfigError("synthetic: need 1 <= blocks <= dim");
  if (spec.items < spec.blocks || spec.users < spec.blocks) throw ConfigError("synthetic: fewer rows than blocks");
  if (spec.min_per_user < 1 || spec.max_per_user < spec.min_per_user || spec.max_per_user > spec.items / spec.blocks) {
    throw ConfigError("synthetic: per-user interaction range must fit inside one block");
  }
  SyntheticData d;
  d.num_users = spec.users;
  d.num_items = spec.items;
  d.user_block.resize(spec.users);
  d.item_block.resize(spec.items);
  std::vector<std::vector<std::uint32_t>> block_items(spec.blocks);
  for (std::size_t i = 0; i < spec.items; ++i) {
    d.item_block[i] = i % spec.blocks;
    block_items[d.item_block[i]].push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t u = 0; u < spec.users; ++u) d.user_block[u] = u % spec.blocks;

  std::mt19937_64 rng(derive_seed(spec.seed, 0));
  std::uniform_int_distribution<std::size_t> count(spec.min_per_user, spec.max_per_user);
  std::uniform_int_distribution<std::size_t> any(0, spec.items - 1);
  std::bernoulli_distribution in_block(spec.in_block);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const auto& own = block_items[d.user_block[u]];
    std::uniform_int_distribution<std::size_t> pick(0, own.size() - 1);
    std::set<std::uint32_t> chosen;
    const std::size_t n = count(rng);
    while (chosen.size() < n) {
      chosen.insert(in_block(rng) ? own[pick(rng)] : static_cast<std::uint32_t>(any(rng)));
    }
    for (auto i : chosen) d.interactions.push_back({static_cast<std::uint32_t>(u), i});
  }
  d.vision = block_features(spec, d.item_block, Modality::Vision, spec.vision_noise, 0, derive_seed(spec.seed, 1));
  d.text = block_features(spec, d.item_block, Modality::Text, spec.text_noise, spec.dim - spec.blocks,
                          derive_seed(spec.seed, 2));
  return d;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "interactions.tsv", std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", (dir / "interactions.tsv").string()));
  for (const auto& x : data.interactions) out << 'u' << x.user << '\t' << x.item << '\n';
  save_features(dir / "vision", data.vision);
  save_features(dir / "text", data.text);
}

}  // namespace dream
