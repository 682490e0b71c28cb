#pragma once

#include <vector>

#include "ppm/tensor.hpp"

namespace ppm {

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Tensor<double> vectors;      // column j pairs with values[j]
};

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix. Only the
/// upper triangle is trusted to be symmetric with the lower one; callers
/// pass a symmetric matrix. Equal eigenvalues keep the order in which the
/// sweep left them (stable sort on the diagonal).
SymmetricEigen symmetric_eigen(const Tensor<double>& matrix, int max_sweeps = 100);

}  // namespace ppm
