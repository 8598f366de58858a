#include "cdcp/gradcheck.hpp"

#include <cmath>

namespace cdcp::ad {

GradCheckResult grad_check(const std::function<Var()>& f, std::span<Var> params, Real step, Real floor) {
  for (auto& p : params) p.zero_grad();
  BranchLog branches;
  {
    RecordScope on(true);
    BranchScope capture(branches, BranchScope::Mode::Capture);
    backward(f());
  }
  RecordScope off(false);
  auto eval = [&] {
    BranchScope replay(branches, BranchScope::Mode::Replay);
    const Real value = f().scalar();
    replay.finish();
    return value;
  };

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& value = params[k].value_mut();
    const Matrix analytic = params[k].grad();
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const Real saved = value.data()[i];
      auto at = [&](Real offset) {
        value.data()[i] = saved + offset;
        return eval();
      };
      // Fourth-order stencil, grouped by symmetric pairs so a coordinate f
      // ignores yields exactly 0, then one Richardson step to sixth order.
      auto stencil = [&](Real h) {
        const Real near = at(h) - at(-h);
        const Real far = at(2.0 * h) - at(-2.0 * h);
        return (8.0 * near - far) / (12.0 * h);
      };
      const Real coarse = stencil(step);
      const Real fine = stencil(0.5 * step);
      const Real numeric = fine + (fine - coarse) / 15.0;
      value.data()[i] = saved;
      const Real a = analytic.data()[i];
      const Real rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + floor);
      if (!(rel <= result.max_relative_error)) {
        result = {rel, k, i, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace cdcp::ad
