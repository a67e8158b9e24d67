#include "groundlab/neural/gradient_check.hpp"

#include <algorithm>
#include <cmath>

namespace groundlab::nn {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape;
  return tape.scalar(loss(tape));
}

}  // namespace

GradientCheckReport gradient_check(ParamStore& store, const LossBuilder& loss, GradientCheckOptions options) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  GradientCheckReport report;
  for (auto& p : store.params()) {
    const std::size_t n = p->value.size();
    std::size_t stride = 1;
    if (options.max_per_param > 0 && n > options.max_per_param) stride = (n + options.max_per_param - 1) / options.max_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double up = evaluate(loss);
      p->value[i] = saved - options.step;
      const double down = evaluate(loss);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.checked;
      if (rel >= report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_param = p->name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace groundlab::nn
