#include "dream/ingest.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "dream/binary_io.hpp"
#include "dream/log.hpp"

namespace dream {

const char* to_string(Modality m) { return m == Modality::Vision ? "vision" : "text"; }

Modality modality_from_string(const std::string& s) {
  if (s == "vision" || s == "image" || s == "v") return Modality::Vision;
  if (s == "text" || s == "t") return Modality::Text;
  throw ConfigError("unknown modality '" + s + "' (expected vision or text)");
}

namespace {

std::uint64_t pair_key(const Interaction& x) { return (std::uint64_t{x.user} << 32) | x.item; }

std::uint32_t intern(std::unordered_map<std::string, std::uint32_t>& index, std::vector<std::string>& ids,
                     const std::string& key) {
  auto [it, inserted] = index.emplace(key, static_cast<std::uint32_t>(ids.size()));
  if (inserted) ids.push_back(key);
  return it->second;
}

}  // namespace

InteractionLog load_interactions(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  InteractionLog log;
  std::unordered_map<std::string, std::uint32_t> users, items;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    if (tab1 == std::string::npos || tab1 == 0) {
      throw DataError(fmt::format("{}:{}: expected 'user<TAB>item'", path.string(), line_no));
    }
    auto tab2 = line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) tab2 = line.size();
    if (tab2 == tab1 + 1) throw DataError(fmt::format("{}:{}: empty item id", path.string(), line_no));
    const Interaction x{intern(users, log.user_ids, line.substr(0, tab1)),
                        intern(items, log.item_ids, line.substr(tab1 + 1, tab2 - tab1 - 1))};
    if (seen.insert(pair_key(x)).second) log.interactions.push_back(x);
  }
  if (log.interactions.empty()) throw DataError("empty dataset: " + path.string());
  return log;
}

KcoreResult kcore_filter(std::span<const Interaction> interactions, std::size_t k) {
  if (k == 0) throw ConfigError("kcore_filter: k must be >= 1");
  std::uint32_t max_user = 0, max_item = 0;
  for (const auto& x : interactions) {
    max_user = std::max(max_user, x.user + 1);
    max_item = std::max(max_item, x.item + 1);
  }
  std::vector<std::size_t> udeg(max_user), ideg(max_item);
  std::vector<bool> alive(interactions.size(), true);
  for (const auto& x : interactions) {
    ++udeg[x.user];
    ++ideg[x.item];
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t e = 0; e < interactions.size(); ++e) {
      if (!alive[e]) continue;
      const auto& x = interactions[e];
      if (udeg[x.user] < k || ideg[x.item] < k) {
        alive[e] = false;
        changed = true;
      }
    }
    std::fill(udeg.begin(), udeg.end(), 0);
    std::fill(ideg.begin(), ideg.end(), 0);
    for (std::size_t e = 0; e < interactions.size(); ++e) {
      if (!alive[e]) continue;
      ++udeg[interactions[e].user];
      ++ideg[interactions[e].item];
    }
  }

  KcoreResult out;
  std::vector<std::uint32_t> unew(max_user, UINT32_MAX), inew(max_item, UINT32_MAX);
  for (std::uint32_t u = 0; u < max_user; ++u) {
    if (udeg[u] == 0) continue;
    unew[u] = static_cast<std::uint32_t>(out.user_map.size());
    out.user_map.push_back(u);
  }
  for (std::uint32_t i = 0; i < max_item; ++i) {
    if (ideg[i] == 0) continue;
    inew[i] = static_cast<std::uint32_t>(out.item_map.size());
    out.item_map.push_back(i);
  }
  for (std::size_t e = 0; e < interactions.size(); ++e) {
    if (alive[e]) out.interactions.push_back({unew[interactions[e].user], inew[interactions[e].item]});
  }
  if (out.interactions.empty()) {
    throw DataError(fmt::format("{}-core filtering removed every interaction", k));
  }
  return out;
}

InteractionLog apply_kcore(const InteractionLog& log, const KcoreResult& core) {
  InteractionLog out;
  out.interactions = core.interactions;
  for (auto u : core.user_map) out.user_ids.push_back(log.user_ids.at(u));
  for (auto i : core.item_map) out.item_ids.push_back(log.item_ids.at(i));
  return out;
}

Splits split_dataset(std::span<const Interaction> interactions, std::size_t num_users,
                     const SplitRatios& ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (ratios.train <= 0 || ratios.val < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-6) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  std::vector<std::vector<std::uint32_t>> per_user(num_users);
  for (const auto& x : interactions) {
    if (x.user >= num_users) throw DimensionError("split_dataset: user index out of range");
    per_user[x.user].push_back(x.item);
  }

  std::mt19937_64 rng(seed);
  Splits s;
  std::size_t folded = 0;
  for (std::uint32_t u = 0; u < num_users; ++u) {
    auto& items = per_user[u];
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t n = items.size();
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));
    if (n == 0) continue;
    if (n_val + n_test >= n) {
      ++folded;
      for (auto i : items) s.train.push_back({u, i});
      continue;
    }
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t k = 0; k < n; ++k) {
      auto& dst = k < n_train ? s.train : (k < n_train + n_val ? s.val : s.test);
      dst.push_back({u, items[k]});
    }
  }
  if (folded > 0) warn(fmt::format("{} user(s) too small to split; all their interactions kept in train", folded));

  // Held-out items must be known to the training graph.
  std::unordered_set<std::uint32_t> train_items;
  for (const auto& x : s.train) train_items.insert(x.item);
  std::size_t moved = 0;
  for (auto* held : {&s.val, &s.test}) {
    std::vector<Interaction> keep;
    for (const auto& x : *held) {
      if (train_items.contains(x.item)) {
        keep.push_back(x);
      } else {
        s.train.push_back(x);
        train_items.insert(x.item);
        ++moved;
      }
    }
    *held = std::move(keep);
  }
  if (moved > 0) warn(fmt::format("{} held-out interaction(s) on train-unseen items moved to train", moved));
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

namespace {

nlohmann::json pairs_to_json(const std::vector<Interaction>& xs) {
  auto arr = nlohmann::json::array();
  for (const auto& x : xs) arr.push_back({x.user, x.item});
  return arr;
}

std::vector<Interaction> pairs_from_json(const nlohmann::json& arr) {
  std::vector<Interaction> out;
  for (const auto& p : arr) out.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
  return out;
}

}  // namespace

void save_split_manifest(const std::filesystem::path& path, const Splits& splits, std::size_t num_users,
                         std::size_t num_items) {
  io::write_json(path, {{"num_users", num_users},
                        {"num_items", num_items},
                        {"train", pairs_to_json(splits.train)},
                        {"val", pairs_to_json(splits.val)},
                        {"test", pairs_to_json(splits.test)}});
}

Splits load_split_manifest(const std::filesystem::path& path, std::size_t* num_users, std::size_t* num_items) {
  const auto j = io::read_json(path);
  try {
    Splits s{pairs_from_json(j.at("train")), pairs_from_json(j.at("val")), pairs_from_json(j.at("test"))};
    if (num_users) *num_users = j.at("num_users").get<std::size_t>();
    if (num_items) *num_items = j.at("num_items").get<std::size_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad split manifest " + path.string() + ": " + e.what());
  }
}

namespace {

void check_finite_rows(const ModalFeatureMatrix& f, const std::string& source) {
  for (std::size_t r = 0; r < f.rows(); ++r) {
    for (float v : f.data.row(r)) {
      if (!std::isfinite(v)) throw DataError(fmt::format("{}: non-finite feature in row {}", source, r));
    }
  }
}

}  // namespace

ModalFeatureMatrix load_features(const std::filesystem::path& stem) {
  const auto sidecar = io::with_ext(stem, ".json");
  const auto header = io::read_json(sidecar);
  std::size_t rows = 0, dim = 0;
  Modality modality{};
  try {
    rows = header.at("rows").get<std::size_t>();
    dim = header.at("dim").get<std::size_t>();
    modality = modality_from_string(header.at("modality").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad feature sidecar " + sidecar.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("bad feature sidecar " + sidecar.string() + ": " + e.what());
  }
  if (rows == 0 || dim == 0) throw DataError("feature sidecar declares an empty matrix: " + sidecar.string());
  const auto body = io::with_ext(stem, ".f32");
  auto in = io::open_in(body, true);
  ModalFeatureMatrix f{modality, Tensor2D(rows, dim, io::read_pod<float>(in, rows * dim, body))};
  check_finite_rows(f, body.string());
  return f;
}

ModalFeatureMatrix load_features_csv(const std::filesystem::path& path, Modality modality) {
  auto in = io::open_in(path);
  std::vector<float> values;
  std::size_t dim = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stof(cell, &used));
      } catch (const std::exception&) {
        throw DataError(fmt::format("{}:{}: bad number '{}'", path.string(), line_no, cell));
      }
      ++count;
    }
    if (rows == 0) dim = count;
    if (count != dim) throw DataError(fmt::format("{}:{}: expected {} columns, got {}", path.string(), line_no, dim, count));
    ++rows;
  }
  if (rows == 0 || dim == 0) throw DataError("empty feature file: " + path.string());
  ModalFeatureMatrix f{modality, Tensor2D(rows, dim, std::move(values))};
  check_finite_rows(f, path.string());
  return f;
}

void save_features(const std::filesystem::path& stem, const ModalFeatureMatrix& features) {
  io::write_json(io::with_ext(stem, ".json"),
                 {{"rows", features.rows()}, {"dim", features.dim()}, {"modality", to_string(features.modality)}});
  auto out = io::open_out(io::with_ext(stem, ".f32"), true);
  io::write_pod(out, std::span<const float>(features.data.data()));
}

ModalFeatureMatrix align_item_features(const ModalFeatureMatrix& raw, std::span<const std::string> item_ids) {
  std::vector<std::size_t> rows;
  rows.reserve(item_ids.size());
  for (const auto& id : item_ids) {
    std::size_t r = 0;
    const auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), r);
    if (ec != std::errc{} || ptr != id.data() + id.size()) {
      throw DataError("item id '" + id + "' is not a feature row index");
    }
    if (r >= raw.rows()) {
      throw DataError(fmt::format("item id {} exceeds {} feature rows ({})", r, raw.rows(), to_string(raw.modality)));
    }
    rows.push_back(r);
  }
  return {raw.modality, select_rows(raw.data, rows)};
}

ModalFeatureMatrix derive_user_features(std::span<const Interaction> train, std::size_t num_users,
                                        const ModalFeatureMatrix& item_features) {
  const std::size_t dim = item_features.dim();
  Matrix sums(num_users, dim);
  std::vector<std::size_t> counts(num_users, 0);
  for (const auto& x : train) {
    if (x.user >= num_users || x.item >= item_features.rows()) {
      throw DimensionError("derive_user_features: interaction index out of range");
    }
    auto dst = sums.row(x.user);
    auto src = item_features.data.row(x.item);
    for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
    ++counts[x.user];
  }
  ModalFeatureMatrix out{item_features.modality, Tensor2D(num_users, dim)};
  std::size_t empty = 0;
  for (std::size_t u = 0; u < num_users; ++u) {
    if (counts[u] == 0) {
      ++empty;
      continue;
    }
    for (std::size_t c = 0; c < dim; ++c) {
      out.data(u, c) = static_cast<float>(sums(u, c) / static_cast<double>(counts[u]));
    }
  }
  if (empty > 0) warn(fmt::format("{} user(s) without training items get zero {} features", empty, to_string(out.modality)));
  return out;
}

}  // namespace dream
