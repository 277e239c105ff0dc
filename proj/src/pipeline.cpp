#include "dream/pipeline.hpp"

#include <random>

#include <fmt/format.h>

#include "dream/binary_io.hpp"
#include "dream/graph_build.hpp"
#include "dream/log.hpp"

namespace dream {

namespace {

constexpr const char* kDataMarker = "manifest.json";
constexpr const char* kGraphMarker = "graphs.json";

bool is_csv(const std::filesystem::path& p) { return p.extension() == ".csv"; }

void require_file(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw DataError(fmt::format("missing input file: {}", p.string()));
}

ModalFeatureMatrix read_raw_features(Modality m, const std::filesystem::path& p) {
  if (is_csv(p)) {
    require_file(p);
    return load_features_csv(p, m);
  }
  auto f = load_features(p);
  if (f.modality != m) {
    throw DataError(fmt::format("{}: sidecar modality '{}' but configured as '{}'", p.string(), to_string(f.modality),
                                to_string(m)));
  }
  return f;
}

std::string stem_name(const char* side, Modality m) { return fmt::format("{}_{}", side, to_string(m)); }

// Builds into a private sibling directory and renames it into place, so
// concurrent processes never observe a partial entry. Returns false when
// another process published the entry first.
template <typename Build>
bool publish(const std::filesystem::path& dir, Build&& build) {
  std::random_device rd;
  const auto tmp = dir.parent_path() / fmt::format(".{}.tmp-{:016x}", dir.filename().string(),
                                                    (static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  std::filesystem::create_directories(tmp);
  try {
    build(tmp);
  } catch (...) {
    std::filesystem::remove_all(tmp);
    throw;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dir, ec);
  if (ec) {
    std::filesystem::remove_all(tmp);
    if (!std::filesystem::exists(dir)) throw DataError(fmt::format("cannot publish cache entry {}", dir.string()));
    return false;
  }
  return true;
}

std::string graph_dir_name(const ModalLineConfig& mc) {
  return mc.self_loop ? fmt::format("graphs_k{}_self", mc.knn_k) : fmt::format("graphs_k{}", mc.knn_k);
}

void build_data_cache(const RunConfig& config, const std::filesystem::path& dir) {
  const auto& dc = config.data;
  require_file(dc.interactions);
  const InteractionLog raw = load_interactions(dc.interactions);
  const KcoreResult core = kcore_filter(raw.interactions, dc.kcore);
  const InteractionLog log = apply_kcore(raw, core);
  info(fmt::format("{}-core: {} users, {} items, {} interactions (from {}/{}/{})", dc.kcore, log.num_users(),
                   log.num_items(), log.interactions.size(), raw.num_users(), raw.num_items(),
                   raw.interactions.size()));
  const Splits splits = split_dataset(log.interactions, log.num_users(), dc.split, dc.split_seed);

  save_split_manifest(dir / "split.json", splits, log.num_users(), log.num_items());
  nlohmann::json modalities = nlohmann::json::array();
  for (const auto& [m, path] : dc.features) {
    const auto items = align_item_features(read_raw_features(m, path), log.item_ids);
    const auto users = derive_user_features(splits.train, log.num_users(), items);
    save_features(dir / stem_name("item", m), items);
    save_features(dir / stem_name("user", m), users);
    modalities.push_back(to_string(m));
  }
  build_normalized_adjacency(splits.train, log.num_users(), log.num_items()).adjacency.save(dir / "adjacency");
  io::write_json(dir / kDataMarker, {{"num_users", log.num_users()},
                                     {"num_items", log.num_items()},
                                     {"modalities", modalities},
                                     {"user_ids", log.user_ids},
                                     {"item_ids", log.item_ids}});
}

void build_graph_cache(const Dataset& ds, const ModalLineConfig& mc, const std::filesystem::path& dir) {
  const RelationGraphOptions opts{mc.knn_k, mc.self_loop};
  for (const auto& [m, f] : ds.item_features) {
    build_relation_graph(f, GraphScope::ItemItem, opts).matrix.save(dir / stem_name("item", m));
    build_relation_graph(ds.user_features.at(m), GraphScope::UserUser, opts).matrix.save(dir / stem_name("user", m));
  }
  io::write_json(dir / kGraphMarker, {{"k", mc.knn_k}, {"self_loop", mc.self_loop}});
}

}  // namespace

std::string data_cache_key(const DataConfig& data) {
  io::Fnv1a h;
  require_file(data.interactions);
  h.update(std::string("interactions"));
  h.update_file(data.interactions);
  for (const auto& [m, p] : data.features) {
    h.update(std::string(to_string(m)));
    if (is_csv(p)) {
      require_file(p);
      h.update_file(p);
    } else {
      require_file(io::with_ext(p, ".json"));
      require_file(io::with_ext(p, ".f32"));
      h.update_file(io::with_ext(p, ".json"));
      h.update_file(io::with_ext(p, ".f32"));
    }
  }
  h.update(fmt::format("kcore={};split={},{},{};seed={}", data.kcore, data.split.train, data.split.val,
                       data.split.test, data.split_seed));
  return h.hex();
}

PreparedData prepare(const RunConfig& config) {
  PreparedData out;
  out.cache_entry = config.cache_dir / data_cache_key(config.data);
  if (std::filesystem::exists(out.cache_entry / kDataMarker)) {
    out.reused_data = true;
    info(fmt::format("reusing cached dataset {}", out.cache_entry.string()));
  } else {
    info(fmt::format("building dataset cache {}", out.cache_entry.string()));
    std::filesystem::create_directories(config.cache_dir);
    if (!publish(out.cache_entry, [&](const std::filesystem::path& tmp) { build_data_cache(config, tmp); })) {
      out.reused_data = true;
      info("dataset cache was published concurrently; reusing it");
    }
  }

  const auto manifest = io::read_json(out.cache_entry / kDataMarker);
  Dataset& ds = out.dataset;
  ds.splits = load_split_manifest(out.cache_entry / "split.json", &ds.num_users, &ds.num_items);
  for (const auto& name : manifest.at("modalities")) {
    const Modality m = modality_from_string(name.get<std::string>());
    ds.item_features[m] = load_features(out.cache_entry / stem_name("item", m));
    ds.user_features[m] = load_features(out.cache_entry / stem_name("user", m));
  }

  out.graph_entry = out.cache_entry / graph_dir_name(config.dream.modal);
  if (!ds.item_features.empty()) {
    if (std::filesystem::exists(out.graph_entry / kGraphMarker)) {
      out.reused_graphs = true;
      info(fmt::format("reusing cached relation graphs {}", out.graph_entry.string()));
    } else {
      info(fmt::format("building relation graphs {}", out.graph_entry.string()));
      if (!publish(out.graph_entry,
                   [&](const std::filesystem::path& tmp) { build_graph_cache(ds, config.dream.modal, tmp); })) {
        out.reused_graphs = true;
      }
    }
  }

  auto inputs = std::make_shared<ModelInputs>();
  inputs->num_users = ds.num_users;
  inputs->num_items = ds.num_items;
  inputs->graph = {ds.num_users, ds.num_items, SparseMatrix::load(out.cache_entry / "adjacency")};
  for (const auto& [m, f] : ds.item_features) {
    ModalSource src;
    src.modality = m;
    src.item_features = Matrix::cast(f.data);
    src.user_features = Matrix::cast(ds.user_features.at(m).data);
    src.item_graph = {m, GraphScope::ItemItem, config.dream.modal.knn_k,
                      SparseMatrix::load(out.graph_entry / stem_name("item", m))};
    src.user_graph = {m, GraphScope::UserUser, config.dream.modal.knn_k,
                      SparseMatrix::load(out.graph_entry / stem_name("user", m))};
    inputs->modalities.push_back(std::move(src));
  }
  out.inputs = std::move(inputs);
  return out;
}

std::unique_ptr<Recommender> build_model(const RunConfig& config, const PreparedData& data) {
  BaselineConfig bc;
  bc.dim = config.dream.behavior.dim;
  bc.layers = config.dream.behavior.layers;
  bc.vision_weight = config.dream.modal.vision_weight;
  bc.bma_plug = config.bma_plug;
  switch (config.model) {
    case ModelKind::Dream:
      return std::make_unique<DreamModel>(data.inputs, config.dream, config.loss, config.seed);
    case ModelKind::LightGcn:
      return std::make_unique<LightGcnBaseline>(data.inputs, bc, config.loss, config.seed);
    case ModelKind::Vbpr:
      return std::make_unique<VbprBaseline>(data.inputs, bc, config.loss, config.seed);
  }
  throw InternalError("unhandled model kind");
}

}  // namespace dream
