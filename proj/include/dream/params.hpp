#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <string>

#include "dream/tensor.hpp"

namespace dream {

struct ParamSlot {
  std::string name;
  Tensor2D value;
  Tensor2D grad;
  Tensor2D adam_m;
  Tensor2D adam_v;
  bool trainable = true;

  ParamSlot(std::string n, Tensor2D v, bool train = true);
  void zero_grad() { grad.fill(0.0f); }
};

/// Independent seed for sub-stream `stream` of a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform Xavier/Glorot initialisation: U(-a, a) with a = sqrt(6 / (rows + cols)).
Tensor2D xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Owns every learnable tensor of a model. Slots have stable addresses.
class ParamStore {
 public:
  ParamSlot& add(std::string name, Tensor2D value, bool trainable = true);

  ParamSlot& at(const std::string& name);
  const ParamSlot& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::deque<ParamSlot>& slots() noexcept { return slots_; }
  const std::deque<ParamSlot>& slots() const noexcept { return slots_; }

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  void zero_grad();
  std::size_t parameter_count() const;

  /// One bias-corrected Adam update on trainable slots using step() + 1,
  /// then zeroes all gradients. Throws NumericError on a non-finite gradient
  /// before touching any value.
  void adam_step(const AdamConfig& cfg);

  /// Copy of all values (for best-epoch snapshots).
  std::vector<Tensor2D> snapshot() const;
  void restore(const std::vector<Tensor2D>& values);

  // Checkpoint: <stem>.bin holds value, adam_m, adam_v per slot as float32;
  // <stem>.json is the manifest (names, shapes, offsets, step).
  void save(const std::filesystem::path& stem) const;
  /// Loads into existing slots; names and shapes must match exactly.
  void load(const std::filesystem::path& stem);

 private:
  std::deque<ParamSlot> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace dream
