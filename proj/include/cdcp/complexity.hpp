#pragma once

#include <vector>

#include "cdcp/types.hpp"

namespace cdcp {

struct ComplexityFit {
  std::vector<Real> sizes;
  std::vector<Real> measurements;
  // Least-squares weights for the basis {n^3, n^2, n, 1}.
  Eigen::Vector4d coefficients = Eigen::Vector4d::Zero();
  // Root-mean-square residual of the fit.
  Real residual = 0.0;
  // log-log slope between the two largest sizes.
  Real dominant_exponent = 0.0;

  Real predict(Real n) const;
};

// Requires at least four distinct sizes.
ComplexityFit fit_complexity(const std::vector<Real>& sizes, const std::vector<Real>& measurements);

}  // namespace cdcp
