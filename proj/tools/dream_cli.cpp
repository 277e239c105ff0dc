#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dream/commands.hpp"
#include "dream/log.hpp"
#include "dream/synthetic.hpp"

namespace {

using namespace dream;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> ablations;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run config (JSON)")->required();
  cmd->add_option("--seed", c.seed, "override the run seed");
  cmd->add_option("--out", c.out, "override the output directory");
  cmd->add_option("--ablate", c.ablations, "ablation flags to apply (repeatable)");
}

RunConfig config_of(const Common& c) {
  CommandOverrides o;
  o.seed = c.seed;
  if (c.out) o.out_dir = *c.out;
  o.ablations = c.ablations;
  return resolve_config(c.config, o);
}

void print_report(const EvalReport& r) {
  for (const auto& [k, v] : r.recall) {
    fmt::print("{} R@{} {:.6f}  N@{} {:.6f}\n", r.split, k, v, k, r.ndcg.at(k));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DREAM dual-representation multimodal recommender"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress output");

  Common common;
  std::string checkpoint;
  std::string split = "test";
  std::vector<std::string> flags;
  bool all_flags = false;
  SyntheticSpec spec;
  std::string synth_out;

  auto* prepare = app.add_subcommand("prepare", "build or reuse the dataset and graph caches");
  add_common(prepare, common);
  auto* train = app.add_subcommand("train", "train a model and write checkpoint, logs and reports");
  add_common(train, common);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint stem, e.g. runs/x/best")->required();
  eval->add_option("--split", split, "train, val or test");
  auto* ablate = app.add_subcommand("ablate", "train the full model and each ablation");
  add_common(ablate, common);
  ablate->add_option("--flags", flags, "ablation rows (default: the standard set)");
  ablate->add_flag("--with-no-alignment", all_flags, "also run the no-alignment row");
  auto* diagnose = app.add_subcommand("diagnose", "drift, alignment and per-line evaluation of a checkpoint");
  add_common(diagnose, common);
  diagnose->add_option("--checkpoint", checkpoint, "checkpoint stem")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the training loss");
  add_common(gradcheck, common);
  auto* exporter = app.add_subcommand("export-embeddings", "write representations as CSV");
  add_common(exporter, common);
  exporter->add_option("--checkpoint", checkpoint, "checkpoint stem")->required();
  auto* synth = app.add_subcommand("synth", "write a block-preference synthetic dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--users", spec.users);
  synth->add_option("--items", spec.items);
  synth->add_option("--blocks", spec.blocks);
  synth->add_option("--dim", spec.dim);
  synth->add_option("--min-per-user", spec.min_per_user);
  synth->add_option("--max-per-user", spec.max_per_user);
  synth->add_option("--in-block", spec.in_block);
  synth->add_option("--seed", spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }
  set_quiet(quiet);

  try {
    if (*prepare) {
      cmd_prepare(config_of(common));
    } else if (*train) {
      const auto result = cmd_train(config_of(common));
      print_report(result.test);
    } else if (*eval) {
      print_report(cmd_eval(config_of(common), checkpoint, split));
    } else if (*ablate) {
      if (flags.empty()) flags = default_ablations();
      if (all_flags) flags.push_back("no-alignment");
      for (const auto& row : cmd_ablate(config_of(common), flags)) {
        fmt::print("{:<20} R@20 {:.6f}  N@20 {:.6f}\n", row.name,
                   row.test.recall.count(20) ? row.test.recall.at(20) : 0.0,
                   row.test.ndcg.count(20) ? row.test.ndcg.at(20) : 0.0);
      }
    } else if (*diagnose) {
      const auto row = cmd_diagnose(config_of(common), checkpoint);
      fmt::print("drift {:.6f}  cosine users {:.6f} items {:.6f} pooled {:.6f}\n", row.drift, row.cosine_users,
                 row.cosine_items, row.cosine_pooled);
      for (const auto& r : row.lines) print_report(r);
    } else if (*gradcheck) {
      const auto report = cmd_gradcheck(config_of(common));
      for (const auto& p : report.params) {
        fmt::print("{:<24} coords {:5d}  max rel {:.3e}  max abs {:.3e}\n", p.name, p.coordinates_checked,
                   p.max_rel_error, p.max_abs_error);
      }
      fmt::print("gradcheck {} (tolerance {:.0e})\n", report.pass ? "PASS" : "FAIL", report.tolerance);
      if (!report.pass) return static_cast<int>(ExitCode::kNumeric);
    } else if (*exporter) {
      cmd_export_embeddings(config_of(common), checkpoint);
    } else if (*synth) {
      write_synthetic(synth_out, make_synthetic(spec));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumeric);
  }
  return 0;
}
