#pragma once

#include <cstdint>
#include <vector>

#include "groundlab/neural/param_store.hpp"

namespace groundlab::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily, in
/// parameter order, on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Throws NumericError naming the first parameter with a non-finite gradient.
  void step(ParamStore& store);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// One-shot update for callers that keep no optimizer state across steps.
void adam_step(ParamStore& store, double lr, double beta1, double beta2, double epsilon);

}  // namespace groundlab::nn
