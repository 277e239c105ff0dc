#include "dream/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "dream/binary_io.hpp"
#include "dream/log.hpp"

namespace dream {

namespace {

constexpr std::size_t kMaxRedraws = 1000;

void accumulate(LossBreakdown& sum, const LossBreakdown& b) {
  sum.general += b.general;
  sum.bia += b.bia;
  sum.mia += b.mia;
  sum.intra += b.intra;
  sum.inter += b.inter;
  sum.s3 += b.s3;
  sum.reg += b.reg;
  sum.total += b.total;
}

LossBreakdown divided(LossBreakdown b, double n) {
  b.general /= n;
  b.bia /= n;
  b.mia /= n;
  b.intra /= n;
  b.inter /= n;
  b.s3 /= n;
  b.reg /= n;
  b.total /= n;
  return b;
}

nlohmann::json epoch_json(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["loss"] = {{"total", r.loss.total}, {"general", r.loss.general}, {"bia", r.loss.bia},   {"mia", r.loss.mia},
               {"inter", r.loss.inter}, {"s3", r.loss.s3},           {"reg", r.loss.reg}};
  j["val_recall"] = r.val_recall;
  j["improved"] = r.improved;
  j["best_epoch"] = r.best_epoch;
  j["best_val_recall"] = r.best_val_recall;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace

TrainIndex::TrainIndex(std::span<const Interaction> train, std::size_t num_users, std::size_t num_items)
    : num_items_(num_items), interactions_(train.begin(), train.end()), items_of_(num_users) {
  for (const auto& x : interactions_) {
    if (x.user >= num_users || x.item >= num_items) {
      throw DimensionError(fmt::format("training interaction ({}, {}) outside {}x{}", x.user, x.item, num_users,
                                       num_items));
    }
    items_of_[x.user].push_back(x.item);
  }
  for (auto& v : items_of_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

bool TrainIndex::contains(std::size_t user, std::size_t item) const {
  const auto& v = items_of_[user];
  return std::binary_search(v.begin(), v.end(), static_cast<std::uint32_t>(item));
}

BatchTriples sample_batch(const TrainIndex& index, std::size_t batch_size, std::mt19937_64& rng) {
  const auto xs = index.interactions();
  if (xs.empty()) throw DataError("sample_batch: empty training set");
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::uniform_int_distribution<std::size_t> item(0, index.num_items() - 1);
  BatchTriples batch;
  batch.users.reserve(batch_size);
  batch.pos_items.reserve(batch_size);
  batch.neg_items.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    std::size_t redraws = 0;
    Interaction x = xs[pick(rng)];
    while (index.items_of(x.user).size() >= index.num_items()) {
      if (++redraws > kMaxRedraws) throw DataError("sample_batch: no user with an unobserved item");
      x = xs[pick(rng)];
    }
    std::size_t neg = item(rng);
    while (index.contains(x.user, neg)) neg = item(rng);
    batch.users.push_back(x.user);
    batch.pos_items.push_back(x.item);
    batch.neg_items.push_back(neg);
  }
  return batch;
}

void TrainerConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
  if (eval_k.empty()) throw ConfigError("eval K list is empty");
  if (std::find(eval_k.begin(), eval_k.end(), stop_k) == eval_k.end()) {
    throw ConfigError(fmt::format("early-stopping K={} missing from the eval K list", stop_k));
  }
  if (!(adam.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

EvalReport evaluate_model(Recommender& model, std::span<const Interaction> split, std::span<const Interaction> train,
                          std::span<const std::size_t> ks, const std::string& name) {
  const auto reps = model.represent();
  EvalReport r = evaluate(reps.general_user, reps.general_item, split, train, ks, true);
  r.split = name;
  return r;
}

TrainResult train(Recommender& model, const Splits& splits, std::size_t num_users, std::size_t num_items,
                  const TrainerConfig& config, const TrainOptions& options) {
  config.validate();
  if (splits.val.empty()) throw DataError("train: empty validation split");
  const TrainIndex index(splits.train, num_users, num_items);
  std::mt19937_64 rng(derive_seed(config.seed, 0x5a17));
  ParamStore& params = model.params();
  const std::size_t batches = (splits.train.size() + config.batch_size - 1) / config.batch_size;

  std::ofstream log;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    log.open(*options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError(fmt::format("cannot write {}", (*options.out_dir / "train_log.jsonl").string()));
  }

  TrainResult result;
  result.best_val_recall = -1.0;
  std::vector<Tensor2D> best = params.snapshot();
  std::uint64_t best_step = params.step();
  std::size_t stale = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    LossBreakdown sum;
    for (std::size_t b = 0; b < batches; ++b) {
      const BatchTriples batch = sample_batch(index, config.batch_size, rng);
      Tape tape;
      const LossTerms loss = model.batch_loss(tape, batch);
      const double total = tape.scalar(loss.total);
      if (!std::isfinite(total)) {
        throw NumericError(fmt::format("non-finite loss at epoch {} batch {}", epoch, b + 1));
      }
      tape.backward(loss.total);
      params.adam_step(config.adam);
      accumulate(sum, loss.breakdown);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = divided(sum, static_cast<double>(batches));
    const EvalReport val = evaluate_model(model, splits.val, splits.train, std::span(&config.stop_k, 1), "val");
    rec.val_recall = val.recall.at(config.stop_k);
    rec.improved = rec.val_recall > result.best_val_recall;
    if (rec.improved) {
      result.best_val_recall = rec.val_recall;
      result.best_epoch = epoch;
      best = params.snapshot();
      best_step = params.step();
      stale = 0;
      if (options.out_dir) params.save(*options.out_dir / "best");
    } else {
      ++stale;
    }
    rec.best_epoch = result.best_epoch;
    rec.best_val_recall = result.best_val_recall;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (log.is_open()) log << epoch_json(rec).dump() << '\n' << std::flush;
    info(fmt::format("epoch {:4d}  loss {:.5f}  val R@{} {:.4f}{}", epoch, rec.loss.total, config.stop_k,
                     rec.val_recall, rec.improved ? "  *" : ""));
    if (options.on_epoch) options.on_epoch(rec, model);
    if (stale >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }

  params.restore(best);
  params.set_step(best_step);
  result.val = evaluate_model(model, splits.val, splits.train, config.eval_k, "val");
  result.val.epoch = result.best_epoch;
  if (!splits.test.empty()) {
    result.test = evaluate_model(model, splits.test, splits.train, config.eval_k, "test");
    result.test.epoch = result.best_epoch;
  }
  return result;
}

}  // namespace dream
