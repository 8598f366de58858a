#include "cdcp/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cdcp/errors.hpp"

namespace cdcp {

Real ComplexityFit::predict(Real n) const {
  return coefficients(0) * n * n * n + coefficients(1) * n * n + coefficients(2) * n + coefficients(3);
}

ComplexityFit fit_complexity(const std::vector<Real>& sizes, const std::vector<Real>& measurements) {
  if (sizes.size() != measurements.size()) throw ParameterError("fit_complexity: sizes and measurements differ");
  if (std::set<Real>(sizes.begin(), sizes.end()).size() < 4) {
    throw ParameterError("fit_complexity: need at least 4 distinct sizes");
  }
  ComplexityFit fit;
  fit.sizes = sizes;
  fit.measurements = measurements;

  const auto m = static_cast<Eigen::Index>(sizes.size());
  const Real largest = *std::max_element(sizes.begin(), sizes.end());
  // Columns are scaled by powers of the largest size for conditioning.
  Matrix basis(m, 4);
  Vector target(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Real x = sizes[i] / largest;
    basis.row(i) << x * x * x, x * x, x, 1.0;
    target(i) = measurements[i];
  }
  const Vector scaled = basis.colPivHouseholderQr().solve(target);
  fit.coefficients << scaled(0) / (largest * largest * largest), scaled(1) / (largest * largest), scaled(2) / largest,
      scaled(3);
  fit.residual = std::sqrt((basis * scaled - target).squaredNorm() / static_cast<Real>(m));

  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
  const std::size_t hi = order.back();
  std::size_t lo = order[order.size() - 2];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (sizes[*it] < sizes[hi]) {
      lo = *it;
      break;
    }
  }
  fit.dominant_exponent = std::log(measurements[hi] / measurements[lo]) / std::log(sizes[hi] / sizes[lo]);
  return fit;
}

}  // namespace cdcp
