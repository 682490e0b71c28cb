#pragma once

#include <functional>
#include <span>
#include <string>

#include "ppm/tensor.hpp"

namespace ppm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[index]" of the worst coordinate
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients with central differences
/// (f(x+eps) - f(x-eps)) / 2eps, coordinate by coordinate, over every
/// parameter in `params`. `loss` evaluates the scalar; `backward` must
/// evaluate it again and accumulate analytic gradients into the (already
/// zeroed) `grad` tensors. Relative error uses max(|a|, |b|, floor) as the
/// denominator, so coordinates whose true gradient is zero are judged on
/// absolute error.
GradCheckResult grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           std::span<Parameter<double>* const> params, double eps,
                           double floor = 1e-8);

}  // namespace ppm
