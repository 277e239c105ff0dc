#include "dream/gradcheck.hpp"

#include <numeric>
#include <random>

namespace dream {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape;
  return tape.scalar(loss(tape));
}

}  // namespace

GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& opts) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }

  // (slot index, coordinate) pairs to probe.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t s = 0; s < params.slots().size(); ++s) {
    const auto& slot = params.slots()[s];
    if (!slot.trainable) continue;
    for (std::size_t k = 0; k < slot.value.size(); ++k) coords.emplace_back(s, k);
  }
  if (coords.size() > opts.max_coordinates) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::max<std::size_t>(opts.max_coordinates, 200));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  std::vector<GradCheckEntry> entries(params.slots().size());
  for (std::size_t s = 0; s < params.slots().size(); ++s) entries[s].name = params.slots()[s].name;

  for (auto [s, k] : coords) {
    auto& slot = params.slots()[s];
    float& x = slot.value.data()[k];
    const float original = x;
    const float plus = static_cast<float>(original + opts.step);
    const float minus = static_cast<float>(original - opts.step);
    x = plus;
    const double f_plus = evaluate(loss);
    x = minus;
    const double f_minus = evaluate(loss);
    x = original;
    const double numeric = (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
    const double analytic = slot.grad.data()[k];
    const double abs_err = std::abs(analytic - numeric);
    const double rel_err = abs_err / std::max({std::abs(analytic), std::abs(numeric), opts.abs_floor});
    auto& e = entries[s];
    ++e.coordinates_checked;
    e.max_abs_error = std::max(e.max_abs_error, abs_err);
    e.max_rel_error = std::max(e.max_rel_error, rel_err);
  }
  params.zero_grad();

  for (auto& e : entries) {
    if (e.coordinates_checked == 0) continue;
    report.pass = report.pass && e.max_rel_error <= opts.tolerance;
    report.params.push_back(std::move(e));
  }
  return report;
}

}  // namespace dream
