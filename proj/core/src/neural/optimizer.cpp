#include "groundlab/neural/optimizer.hpp"

#include <cmath>

#include "groundlab/error.hpp"

namespace groundlab::nn {

void Adam::step(ParamStore& store) {
  auto& params = store.params();
  for (const auto& p : params)
    for (double g : p->grad.values())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p->name);
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double epsilon) {
  Adam adam({lr, beta1, beta2, epsilon});
  adam.step(store);
}

}  // namespace groundlab::nn
