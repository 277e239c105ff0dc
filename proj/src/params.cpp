#include "dream/params.hpp"

#include <random>

#include <fmt/format.h>

#include "dream/binary_io.hpp"

namespace dream {

ParamSlot::ParamSlot(std::string n, Tensor2D v, bool train)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.rows(), value.cols()),
      adam_m(value.rows(), value.cols()),
      adam_v(value.rows(), value.cols()),
      trainable(train) {}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor2D xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ConfigError("xavier_init: rows and cols must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor2D t(rows, cols);
  for (auto& v : t.data()) v = static_cast<float>(dist(rng));
  return t;
}

ParamSlot& ParamStore::add(std::string name, Tensor2D value, bool trainable) {
  if (contains(name)) throw InternalError("duplicate parameter name: " + name);
  return slots_.emplace_back(std::move(name), std::move(value), trainable);
}

ParamSlot& ParamStore::at(const std::string& name) {
  for (auto& s : slots_) {
    if (s.name == name) return s;
  }
  throw InternalError("unknown parameter: " + name);
}

const ParamSlot& ParamStore::at(const std::string& name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(slots_.begin(), slots_.end(), [&](const ParamSlot& s) { return s.name == name; });
}

void ParamStore::zero_grad() {
  for (auto& s : slots_) s.zero_grad();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  for (const auto& s : slots_) {
    if (!s.trainable) continue;
    const auto& g = s.grad.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g[k])) {
        throw NumericError(fmt::format("non-finite gradient in '{}' at ({}, {})", s.name,
                                       k / s.grad.cols(), k % s.grad.cols()));
      }
    }
  }
  const std::uint64_t t = step_ + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& s : slots_) {
    if (!s.trainable) continue;
    auto& w = s.value.data();
    auto& m = s.adam_m.data();
    auto& v = s.adam_v.data();
    const auto& g = s.grad.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double m_hat = mk / bc1;
      const double v_hat = vk / bc2;
      w[k] = static_cast<float>(w[k] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
  step_ = t;
  zero_grad();
}

std::vector<Tensor2D> ParamStore::snapshot() const {
  std::vector<Tensor2D> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.push_back(s.value);
  return out;
}

void ParamStore::restore(const std::vector<Tensor2D>& values) {
  if (values.size() != slots_.size()) throw InternalError("snapshot size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!values[k].same_shape(slots_[k].value)) throw InternalError("snapshot shape mismatch");
    slots_[k].value = values[k];
  }
}

void ParamStore::save(const std::filesystem::path& stem) const {
  nlohmann::json manifest;
  manifest["format"] = "dream-checkpoint-v1";
  manifest["step"] = step_;
  auto& list = manifest["slots"] = nlohmann::json::array();
  std::size_t offset = 0;
  auto out = io::open_out(io::with_ext(stem, ".bin"), true);
  for (const auto& s : slots_) {
    list.push_back({{"name", s.name},
                    {"rows", s.value.rows()},
                    {"cols", s.value.cols()},
                    {"trainable", s.trainable},
                    {"offset", offset}});
    for (const Tensor2D* t : {&s.value, &s.adam_m, &s.adam_v}) {
      io::write_pod(out, std::span<const float>(t->data()));
    }
    offset += 3 * s.value.size() * sizeof(float);
  }
  io::write_json(io::with_ext(stem, ".json"), manifest);
}

void ParamStore::load(const std::filesystem::path& stem) {
  const auto manifest_path = io::with_ext(stem, ".json");
  const auto manifest = io::read_json(manifest_path);
  const auto bin_path = io::with_ext(stem, ".bin");
  auto in = io::open_in(bin_path, true);
  try {
    const auto& list = manifest.at("slots");
    if (list.size() != slots_.size()) {
      throw DimensionError(fmt::format("checkpoint has {} parameters, model expects {}", list.size(),
                                       slots_.size()));
    }
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      auto& s = slots_[k];
      const auto& entry = list[k];
      const auto name = entry.at("name").get<std::string>();
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      if (name != s.name || rows != s.value.rows() || cols != s.value.cols()) {
        throw DimensionError(fmt::format("checkpoint slot '{}' ({}x{}) does not match model slot '{}' ({}x{})",
                                         name, rows, cols, s.name, s.value.rows(), s.value.cols()));
      }
      for (Tensor2D* t : {&s.value, &s.adam_m, &s.adam_v}) {
        *t = Tensor2D(rows, cols, io::read_pod<float>(in, rows * cols, bin_path));
      }
      s.zero_grad();
    }
    step_ = manifest.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
}

}  // namespace dream
