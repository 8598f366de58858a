#pragma once

#include <functional>
#include <span>

#include "cdcp/autodiff.hpp"

namespace cdcp::ad {

struct GradCheckResult {
  Real max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Eigen::Index worst_index = 0;
  Real analytic = 0.0;
  Real numeric = 0.0;
};

// Compares the backward-pass gradient of `f` against central differences,
// coordinate by coordinate: fourth-order stencils at `step` and `step / 2`
// combined by one Richardson extrapolation. Relative error uses the denominator
// |analytic| + |numeric| + floor; the floor keeps coordinates whose exact
// gradient is zero (rounding noise on both sides) from reading as relative
// error of order one. Piecewise-linear primitives are held on the
// pieces chosen at the unperturbed point (see BranchScope), so the reference
// is the derivative of that piece even when a stencil point crosses a kink.
// `f` must evaluate the same primitives in the same order on every call.
// Parameter gradients are overwritten.
GradCheckResult grad_check(const std::function<Var()>& f, std::span<Var> params, Real step = 1e-3,
                           Real floor = 1e-7);

}  // namespace cdcp::ad
