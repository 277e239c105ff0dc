#include "dream/commands.hpp"

#include <fstream>

#include <fmt/format.h>

#include "dream/binary_io.hpp"
#include "dream/log.hpp"

namespace dream {

namespace {

const std::vector<Interaction>& split_by_name(const Dataset& ds, const std::string& name) {
  if (name == "val") return ds.splits.val;
  if (name == "test") return ds.splits.test;
  if (name == "train") return ds.splits.train;
  throw ConfigError(fmt::format("unknown split '{}' (expected train, val or test)", name));
}

std::string dataset_name(const RunConfig& config) {
  const auto parent = config.data.interactions.parent_path().filename().string();
  return parent.empty() ? config.data.interactions.stem().string() : parent;
}

void write_csv(const std::filesystem::path& path, const Tensor2D& t) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << fmt::format("{:.7g}", row[c]);
    out << '\n';
  }
}

std::unique_ptr<Recommender> load_model(const RunConfig& config, const PreparedData& data,
                                        const std::filesystem::path& checkpoint) {
  auto model = build_model(config, data);
  model->params().load(checkpoint);
  return model;
}

}  // namespace

void apply_overrides(RunConfig& config, const CommandOverrides& overrides) {
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.trainer.seed = *overrides.seed;
  }
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  for (const auto& a : overrides.ablations) apply_ablation(config, a);
  config.validate();
}

RunConfig resolve_config(const std::filesystem::path& path, const CommandOverrides& overrides) {
  RunConfig config = load_run_config(path);
  apply_overrides(config, overrides);
  return config;
}

PreparedData cmd_prepare(const RunConfig& config) {
  PreparedData data = prepare(config);
  info(fmt::format("dataset: {} users, {} items, train/val/test = {}/{}/{}", data.dataset.num_users,
                   data.dataset.num_items, data.dataset.splits.train.size(), data.dataset.splits.val.size(),
                   data.dataset.splits.test.size()));
  return data;
}

TrainResult cmd_train(const RunConfig& config) {
  const PreparedData data = cmd_prepare(config);
  auto model = build_model(config, data);
  echo_run_config(config, config.out_dir);
  const auto& splits = data.dataset.splits;
  const auto drift_rows = drift_sample(data.dataset.num_items, config.drift_sample, derive_seed(config.seed, 0xd1f7));
  std::vector<DiagnosticsRow> diagnostics;
  TrainOptions options;
  options.out_dir = config.out_dir;
  options.on_epoch = [&](const EpochRecord& rec, Recommender& m) {
    diagnostics.push_back(diagnose(m, rec.epoch, drift_rows, splits.val, splits.train, config.trainer.eval_k));
  };
  TrainResult result = train(*model, splits, data.dataset.num_users, data.dataset.num_items, config.trainer, options);
  write_diagnostics(config.out_dir, diagnostics);
  io::write_json(config.out_dir / "val.json", to_json(result.val));
  if (!splits.test.empty()) {
    io::write_json(config.out_dir / "test.json", to_json(result.test));
    append_report_csv(config.out_dir / "results.csv", result.test);
    info(fmt::format("best epoch {}: test R@20 {:.4f}  N@20 {:.4f}", result.best_epoch,
                     result.test.recall.count(20) ? result.test.recall.at(20) : 0.0,
                     result.test.ndcg.count(20) ? result.test.ndcg.at(20) : 0.0));
  }
  return result;
}

EvalReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint, const std::string& split) {
  const PreparedData data = cmd_prepare(config);
  auto model = load_model(config, data, checkpoint);
  const auto& ds = data.dataset;
  EvalReport r = evaluate_model(*model, split_by_name(ds, split), ds.splits.train, config.trainer.eval_k, split);
  std::filesystem::create_directories(config.out_dir);
  io::write_json(config.out_dir / fmt::format("eval_{}.json", split), to_json(r));
  return r;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config, const std::vector<std::string>& flags) {
  for (const auto& f : flags) {
    if (!is_ablation(f)) throw ConfigError(fmt::format("unknown ablation '{}'", f));
  }
  std::vector<AblationRow> rows;
  std::vector<std::string> names{"full"};
  names.insert(names.end(), flags.begin(), flags.end());
  for (const auto& name : names) {
    RunConfig run = config;
    if (name != "full") apply_ablation(run, name);
    run.out_dir = config.out_dir / name;
    info(fmt::format("== ablation row '{}'", name));
    rows.push_back({name, cmd_train(run).test});
  }
  std::filesystem::create_directories(config.out_dir);
  std::ofstream out(config.out_dir / "ablation.csv", std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", (config.out_dir / "ablation.csv").string()));
  const std::string ds = dataset_name(config);
  out << "variant";
  for (auto k : config.trainer.eval_k) out << fmt::format(",{}_R@{},{}_N@{}", ds, k, ds, k);
  out << '\n';
  for (const auto& row : rows) {
    out << row.name;
    for (auto k : config.trainer.eval_k) {
      out << fmt::format(",{:.6f},{:.6f}", row.test.recall.count(k) ? row.test.recall.at(k) : 0.0,
                         row.test.ndcg.count(k) ? row.test.ndcg.at(k) : 0.0);
    }
    out << '\n';
  }
  return rows;
}

DiagnosticsRow cmd_diagnose(const RunConfig& config, const std::filesystem::path& checkpoint) {
  const PreparedData data = cmd_prepare(config);
  auto model = load_model(config, data, checkpoint);
  const auto& ds = data.dataset;
  const auto drift_rows = drift_sample(ds.num_items, config.drift_sample, derive_seed(config.seed, 0xd1f7));
  DiagnosticsRow row =
      diagnose(*model, model->params().step(), drift_rows, ds.splits.test, ds.splits.train, config.trainer.eval_k);
  write_diagnostics(config.out_dir, std::span(&row, 1));
  return row;
}

GradCheckReport cmd_gradcheck(const RunConfig& config, std::size_t batch_size, const GradCheckOptions& opts) {
  const PreparedData data = cmd_prepare(config);
  auto model = build_model(config, data);
  const TrainIndex index(data.dataset.splits.train, data.dataset.num_users, data.dataset.num_items);
  std::mt19937_64 rng(derive_seed(config.seed, 0x9c));
  const BatchTriples batch = sample_batch(index, batch_size, rng);
  return grad_check(model->params(), [&](Tape& tape) { return model->batch_loss(tape, batch).total; }, opts);
}

void cmd_export_embeddings(const RunConfig& config, const std::filesystem::path& checkpoint) {
  const PreparedData data = cmd_prepare(config);
  auto model = load_model(config, data, checkpoint);
  const DualRepresentations r = model->represent();
  const auto dir = config.out_dir / "embeddings";
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const Tensor2D*> tables[] = {
      {"behavior_user", &r.behavior_user}, {"behavior_item", &r.behavior_item}, {"modal_user", &r.modal_user},
      {"modal_item", &r.modal_item},       {"general_user", &r.general_user},   {"general_item", &r.general_item}};
  for (auto [name, t] : tables) {
    if (!t->empty()) write_csv(dir / fmt::format("{}.csv", name), *t);
  }
  info(fmt::format("wrote embeddings to {}", dir.string()));
}

}  // namespace dream
