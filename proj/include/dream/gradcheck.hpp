#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dream/autodiff.hpp"
#include "dream/params.hpp"

namespace dream {

struct GradCheckEntry {
  std::string name;
  std::size_t coordinates_checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double tolerance = 0.0;
  bool pass = true;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  /// Coordinates sampled across all trainable slots (every coordinate when
  /// the model is smaller); at least 200 whenever that many exist.
  std::size_t max_coordinates = 2000;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-6;
  std::uint64_t seed = 7;
};

/// Records a loss on the given tape and returns its node.
using LossBuilder = std::function<NodeId(Tape&)>;

// Central finite differences on the float32 parameter values. The realised
// step (x+h) - (x-h) after float rounding is used as the denominator, and
// the loss is evaluated in double, so the oracle is not limited by float32
// rounding of h. Stop-gradient branches are re-applied on every evaluation
// because the builder records the same graph each time.
GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& opts = {});

}  // namespace dream
