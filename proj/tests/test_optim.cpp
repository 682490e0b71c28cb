#include <gtest/gtest.h>

#include <cmath>

#include "ppm/errors.hpp"
#include "ppm/optim.hpp"

namespace ppm {
namespace {

Parameter<double> scalar(double v) {
  Parameter<double> p("p", 1, 1);
  p.value[0] = v;
  return p;
}

TEST(AdamW, ZeroGradientNoDecayIsFixedPoint) {
  auto p = scalar(0.7);
  std::vector<Parameter<double>*> params{&p};
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 5; ++i) opt.step(params, 0.1);
  EXPECT_EQ(p.value[0], 0.7);
  EXPECT_EQ(opt.steps(), 5);
}

TEST(AdamW, ZeroGradientShrinksMultiplicatively) {
  auto p = scalar(2.0);
  std::vector<Parameter<double>*> params{&p};
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.01});
  opt.step(params, 0.1);
  EXPECT_DOUBLE_EQ(p.value[0], 2.0 * (1 - 0.1 * 0.01));
}

TEST(AdamW, FirstStepOnHalfSquare) {
  // t = 1: m_hat = g, v_hat = g^2, so the Adam move is lr * g / (|g| + eps).
  for (double wd : {0.0, 0.01}) {
    auto p = scalar(1.0);
    p.grad[0] = 1.0;  // d/dp p^2/2 at p = 1
    std::vector<Parameter<double>*> params{&p};
    AdamW<double> opt({0.9, 0.999, 1e-8, wd});
    opt.step(params, 0.1);
    const double expected = 1.0 * (1 - 0.1 * wd) - 0.1 * 1.0 / (1.0 + 1e-8);
    EXPECT_NEAR(p.value[0], expected, 1e-12);
    EXPECT_NEAR(p.value[0], 0.9, 2e-3);
  }
}

TEST(AdamW, SecondStepMatchesRecurrence) {
  auto p = scalar(1.0);
  std::vector<Parameter<double>*> params{&p};
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  p.grad[0] = 1.0;
  opt.step(params, 0.1);
  p.grad[0] = -0.5;
  opt.step(params, 0.1);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -0.5;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 0.25;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  const double after_first = 1.0 - 0.1 / (1.0 + 1e-8);
  EXPECT_NEAR(p.value[0], after_first - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
}

TEST(AdamW, ConvexQuadraticConverges) {
  Parameter<double> p("p", 1, 4);
  const double curv[] = {1.0, 3.0, 0.5, 10.0};
  for (std::size_t i = 0; i < 4; ++i) p.value[i] = 1.0 + static_cast<double>(i);
  std::vector<Parameter<double>*> params{&p};
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  double norm = 0;
  for (int t = 0; t < 3000; ++t) {
    for (std::size_t i = 0; i < 4; ++i) p.grad[i] = curv[i] * p.value[i];
    opt.step(params, step_lr(0.1, 0.997, 1, t));
  }
  for (std::size_t i = 0; i < 4; ++i) norm += std::pow(curv[i] * p.value[i], 2);
  EXPECT_LT(std::sqrt(norm), 1e-3);
}

TEST(AdamW, ParameterListMustNotChange) {
  auto a = scalar(1.0), b = scalar(2.0);
  std::vector<Parameter<double>*> one{&a}, two{&a, &b};
  AdamW<double> opt;
  opt.step(one, 0.1);
  EXPECT_THROW(opt.step(two, 0.1), Error);
}

TEST(StepLr, Examples) {
  EXPECT_EQ(step_lr(0.01, 0.5, 1, 0), 0.01);
  EXPECT_DOUBLE_EQ(step_lr(0.01, 0.5, 1, 2), 0.0025);
  EXPECT_DOUBLE_EQ(step_lr(1.0, 0.5, 3, 5), 0.5);
  const double ratio = step_lr(1.0, 0.989695, 1, 100);
  EXPECT_NEAR(ratio, std::pow(0.989695, 100), 1e-15);
  EXPECT_NEAR(ratio, 0.355, 1e-3);
  EXPECT_THROW(step_lr(1.0, 0.9, 0, 1), Error);
  EXPECT_THROW(step_lr(1.0, 0.9, 1, -1), Error);
}

TEST(StepLr, NonIncreasing) {
  double prev = step_lr(0.003, 0.9, 2, 0);
  for (int e = 1; e < 60; ++e) {
    const double lr = step_lr(0.003, 0.9, 2, e);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

}  // namespace
}  // namespace ppm
