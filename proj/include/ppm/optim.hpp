#pragma once

#include <span>
#include <vector>

#include "ppm/tensor.hpp"

namespace ppm {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: p <- p - lr*wd*p, then the
/// bias-corrected Adam update. Moment buffers are matched to parameters by
/// position, so the same parameter list must be passed to every step.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(std::span<Parameter<T>* const> params, double lr);

  long steps() const { return t_; }

 private:
  AdamWConfig config_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

/// lr0 * gamma^floor(epoch / step_epochs)
double step_lr(double lr0, double gamma, int step_epochs, int epoch);

}  // namespace ppm
