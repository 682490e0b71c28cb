#include "ppm/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ppm {

GradCheckResult grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           std::span<Parameter<double>* const> params, double eps,
                           double floor) {
  for (auto* p : params) p->zero_grad();
  backward();

  GradCheckResult result;
  for (auto* p : params) {
    const Tensor<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = loss();
      p->value[i] = saved - eps;
      const double down = loss();
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = p->name + "[" + std::to_string(i) + "]";
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ppm
