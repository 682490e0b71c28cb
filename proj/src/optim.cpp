#include "ppm/optim.hpp"

#include <cmath>

#include "ppm/errors.hpp"

namespace ppm {

template <typename T>
void AdamW<T>::step(std::span<Parameter<T>* const> params, double lr) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != params.size()) {
    throw Error(ErrorKind::Shape, "AdamW: parameter list changed between steps");
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T decay = static_cast<T>(1.0 - lr * config_.weight_decay);
  const T step = static_cast<T>(lr / correction1);
  const T sqrt_c2 = static_cast<T>(std::sqrt(correction2));
  const T eps = static_cast<T>(config_.eps);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i]->value;
    const auto& grad = params[i]->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const T g = grad[j];
      value[j] *= decay;
      m[j] = tb1 * m[j] + (T{1} - tb1) * g;
      v[j] = tb2 * v[j] + (T{1} - tb2) * g * g;
      value[j] -= step * m[j] / (std::sqrt(v[j]) / sqrt_c2 + eps);
    }
  }
}

double step_lr(double lr0, double gamma, int step_epochs, int epoch) {
  if (step_epochs < 1) throw Error(ErrorKind::Parameter, "step_lr: step_epochs must be >= 1");
  if (epoch < 0) throw Error(ErrorKind::Parameter, "step_lr: epoch must be >= 0");
  return lr0 * std::pow(gamma, epoch / step_epochs);
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace ppm
