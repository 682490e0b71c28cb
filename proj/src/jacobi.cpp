#include "ppm/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppm/errors.hpp"

namespace ppm {

namespace {

double off_diagonal_norm2(const Tensor<double>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) s += 2.0 * a(i, j) * a(i, j);
  }
  return s;
}

}  // namespace

SymmetricEigen symmetric_eigen(const Tensor<double>& matrix, int max_sweeps) {
  if (matrix.rows() != matrix.cols()) {
    throw Error(ErrorKind::Shape, "symmetric_eigen: matrix is not square");
  }
  const std::size_t n = matrix.rows();
  Tensor<double> a = matrix;
  Tensor<double> v = Tensor<double>::identity(n);

  double frob2 = 0.0;
  for (double x : a.values()) frob2 += x * x;
  const double tol2 = frob2 * 1e-32;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm2(a) <= tol2) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Once the rotation can no longer change either diagonal entry in
        // double precision, the off-diagonal entry is numerically zero.
        if (sweep > 3 && std::abs(apq) * 1e18 < std::abs(a(p, p)) &&
            std::abs(apq) * 1e18 < std::abs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  SymmetricEigen result;
  result.values.resize(n);
  result.vectors = Tensor<double>(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) result.vectors(i, j) = v(i, order[j]);
  }
  return result;
}

}  // namespace ppm
