#include "dream/config.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "dream/binary_io.hpp"

namespace dream {

namespace {

using nlohmann::json;

// Rejects keys outside `allowed` so typos in config files surface early.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", where));
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.contains(k)) throw ConfigError(fmt::format("config: unknown key '{}{}'", where.empty() ? "" : where + ".", k));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: bad value for '{}': {}", key, e.what()));
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : std::filesystem::absolute(base / path).lexically_normal();
}

const char* gate_input_name(GateInput g) { return g == GateInput::Base ? "base" : "aggregated"; }

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Dream: return "dream";
    case ModelKind::LightGcn: return "lightgcn";
    case ModelKind::Vbpr: return "vbpr";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "dream") return ModelKind::Dream;
  if (s == "lightgcn") return ModelKind::LightGcn;
  if (s == "vbpr") return ModelKind::Vbpr;
  throw ConfigError(fmt::format("unknown model kind '{}'", s));
}

void RunConfig::validate() const {
  if (data.kcore < 1) throw ConfigError("data.kcore must be >= 1");
  const double sum = data.split.train + data.split.val + data.split.test;
  if (data.split.train <= 0 || data.split.val < 0 || data.split.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("data.split ratios must be positive and sum to 1");
  }
  if (dream.behavior.layers < 0) throw ConfigError("model.behavior_layers must be >= 0");
  if (dream.behavior.dim < 1) throw ConfigError("model.dim must be >= 1");
  if (drift_sample < 2) throw ConfigError("diagnostics.drift_sample must be >= 2");
  dream.modal.validate();
  loss.validate();
  trainer.validate();
  for (const auto& a : ablations) {
    if (!is_ablation(a)) throw ConfigError(fmt::format("unknown ablation '{}'", a));
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_json(a) == to_json(b); }

json to_json(const RunConfig& c) {
  json features = json::object();
  for (const auto& [m, p] : c.data.features) features[to_string(m)] = p.string();
  const auto& mc = c.dream.modal;
  return json{
      {"data",
       {{"interactions", c.data.interactions.string()},
        {"features", features},
        {"kcore", c.data.kcore},
        {"split", {{"train", c.data.split.train}, {"val", c.data.split.val}, {"test", c.data.split.test}}},
        {"split_seed", c.data.split_seed}}},
      {"cache_dir", c.cache_dir.string()},
      {"out_dir", c.out_dir.string()},
      {"seed", c.seed},
      {"model",
       {{"kind", to_string(c.model)},
        {"dim", c.dream.behavior.dim},
        {"behavior_layers", c.dream.behavior.layers},
        {"modal_layers", mc.layers},
        {"vision_weight", mc.vision_weight},
        {"knn_k", mc.knn_k},
        {"self_loop", mc.self_loop},
        {"modal_line", mc.enabled},
        {"vision", mc.vision},
        {"text", mc.text},
        {"filter_gate", mc.filter_gate},
        {"item_graph", mc.item_graph},
        {"user_graph", mc.user_graph},
        {"gate_input", gate_input_name(mc.gate_input)},
        {"detach_gate_behavior", mc.detach_gate_behavior},
        {"bma_plug", c.bma_plug}}},
      {"loss",
       {{"alpha", c.loss.alpha},
        {"beta", c.loss.beta},
        {"gamma", c.loss.gamma},
        {"lambda", c.loss.lambda},
        {"tau", c.loss.tau},
        {"normalize", c.loss.normalize}}},
      {"train",
       {{"batch_size", c.trainer.batch_size},
        {"lr", c.trainer.adam.lr},
        {"beta1", c.trainer.adam.beta1},
        {"beta2", c.trainer.adam.beta2},
        {"eps", c.trainer.adam.eps},
        {"max_epochs", c.trainer.max_epochs},
        {"patience", c.trainer.patience},
        {"eval_k", c.trainer.eval_k},
        {"stop_k", c.trainer.stop_k}}},
      {"diagnostics", {{"drift_sample", c.drift_sample}}},
      {"ablations", c.ablations}};
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  check_keys(j, "", {"data", "cache_dir", "out_dir", "seed", "model", "loss", "train", "diagnostics", "ablations"});
  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"interactions", "features", "kcore", "split", "split_seed"});
    std::string interactions;
    read(d, "interactions", interactions);
    if (!interactions.empty()) c.data.interactions = resolve(base_dir, interactions);
    if (d.contains("features")) {
      check_keys(d["features"], "data.features", {"vision", "text"});
      for (const auto& [k, v] : d["features"].items()) {
        if (!v.is_string()) throw ConfigError(fmt::format("config: data.features.{} must be a path", k));
        c.data.features[modality_from_string(k)] = resolve(base_dir, v.get<std::string>());
      }
    }
    read(d, "kcore", c.data.kcore);
    if (d.contains("split")) {
      check_keys(d["split"], "data.split", {"train", "val", "test"});
      read(d["split"], "train", c.data.split.train);
      read(d["split"], "val", c.data.split.val);
      read(d["split"], "test", c.data.split.test);
    }
    read(d, "split_seed", c.data.split_seed);
  }
  std::string cache_dir = c.cache_dir.string(), out_dir = c.out_dir.string();
  read(j, "cache_dir", cache_dir);
  read(j, "out_dir", out_dir);
  c.cache_dir = cache_dir;
  c.out_dir = out_dir;
  read(j, "seed", c.seed);
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model",
               {"kind", "dim", "behavior_layers", "modal_layers", "vision_weight", "knn_k", "self_loop", "modal_line",
                "vision", "text", "filter_gate", "item_graph", "user_graph", "gate_input", "detach_gate_behavior",
                "bma_plug"});
    std::string kind = to_string(c.model);
    read(m, "kind", kind);
    c.model = model_kind_from_string(kind);
    auto& mc = c.dream.modal;
    read(m, "dim", c.dream.behavior.dim);
    read(m, "behavior_layers", c.dream.behavior.layers);
    read(m, "modal_layers", mc.layers);
    read(m, "vision_weight", mc.vision_weight);
    read(m, "knn_k", mc.knn_k);
    read(m, "self_loop", mc.self_loop);
    read(m, "modal_line", mc.enabled);
    read(m, "vision", mc.vision);
    read(m, "text", mc.text);
    read(m, "filter_gate", mc.filter_gate);
    read(m, "item_graph", mc.item_graph);
    read(m, "user_graph", mc.user_graph);
    std::string gate = gate_input_name(mc.gate_input);
    read(m, "gate_input", gate);
    if (gate == "base") {
      mc.gate_input = GateInput::Base;
    } else if (gate == "aggregated") {
      mc.gate_input = GateInput::Aggregated;
    } else {
      throw ConfigError(fmt::format("config: model.gate_input must be 'base' or 'aggregated', got '{}'", gate));
    }
    read(m, "detach_gate_behavior", mc.detach_gate_behavior);
    read(m, "bma_plug", c.bma_plug);
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    check_keys(l, "loss", {"alpha", "beta", "gamma", "lambda", "tau", "normalize"});
    read(l, "alpha", c.loss.alpha);
    read(l, "beta", c.loss.beta);
    read(l, "gamma", c.loss.gamma);
    read(l, "lambda", c.loss.lambda);
    read(l, "tau", c.loss.tau);
    read(l, "normalize", c.loss.normalize);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, "train", {"batch_size", "lr", "beta1", "beta2", "eps", "max_epochs", "patience", "eval_k", "stop_k"});
    read(t, "batch_size", c.trainer.batch_size);
    read(t, "lr", c.trainer.adam.lr);
    read(t, "beta1", c.trainer.adam.beta1);
    read(t, "beta2", c.trainer.adam.beta2);
    read(t, "eps", c.trainer.adam.eps);
    read(t, "max_epochs", c.trainer.max_epochs);
    read(t, "patience", c.trainer.patience);
    read(t, "eval_k", c.trainer.eval_k);
    read(t, "stop_k", c.trainer.stop_k);
  }
  if (j.contains("diagnostics")) {
    check_keys(j["diagnostics"], "diagnostics", {"drift_sample"});
    read(j["diagnostics"], "drift_sample", c.drift_sample);
  }
  read(j, "ablations", c.ablations);
  c.trainer.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("config file not found: {}", path.string()));
  json j;
  try {
    j = io::read_json(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

void echo_run_config(const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_json(dir / "config.json", to_json(config));
}

const std::vector<std::string>& default_ablations() {
  static const std::vector<std::string> names{"no-filter-gate", "no-relation-graphs", "no-text", "no-image",
                                              "no-modal-encoders", "no-s3", "no-intra", "no-inter"};
  return names;
}

bool is_ablation(const std::string& name) {
  const auto& d = default_ablations();
  return name == "no-alignment" || std::find(d.begin(), d.end(), name) != d.end();
}

void apply_ablation(RunConfig& c, const std::string& flag) {
  auto& m = c.dream.modal;
  if (flag == "no-filter-gate") {
    m.filter_gate = false;
  } else if (flag == "no-relation-graphs") {
    m.item_graph = m.user_graph = false;
  } else if (flag == "no-text") {
    m.text = false;
  } else if (flag == "no-image") {
    m.vision = false;
  } else if (flag == "no-modal-encoders") {
    m.enabled = false;
  } else if (flag == "no-s3") {
    c.loss.gamma = 0.0;
  } else if (flag == "no-intra") {
    c.loss.alpha = 0.0;
  } else if (flag == "no-inter") {
    c.loss.beta = 0.0;
  } else if (flag == "no-alignment") {
    c.loss.alpha = c.loss.beta = 0.0;
  } else {
    throw ConfigError(fmt::format("unknown ablation '{}'", flag));
  }
  if (std::find(c.ablations.begin(), c.ablations.end(), flag) == c.ablations.end()) c.ablations.push_back(flag);
}

}  // namespace dream
