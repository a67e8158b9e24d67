#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "groundlab/neural/param_store.hpp"
#include "groundlab/neural/tape.hpp"

namespace groundlab::nn {

struct GradientCheckOptions {
  double step = 1e-5;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-5;
  /// Caps the number of coordinates checked per parameter (0 = all).
  std::size_t max_per_param = 0;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

using LossBuilder = std::function<Var(Tape&)>;

/// Central finite differences against the tape's analytic gradients, for
/// every parameter in `store`.
GradientCheckReport gradient_check(ParamStore& store, const LossBuilder& loss, GradientCheckOptions options = {});

}  // namespace groundlab::nn
