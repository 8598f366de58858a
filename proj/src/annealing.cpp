#include "cdcp/annealing.hpp"

#include <cmath>

#include "cdcp/errors.hpp"

namespace cdcp {

Real SaSchedule::temperature_at(int step) const {
  return t0 * std::pow(alpha, static_cast<Real>(step));
}

SaSchedule SaSchedule::reaching_one(Real t0, int steps_t1) {
  SaSchedule s;
  s.t0 = t0;
  s.alpha = sa_alpha(t0, steps_t1);
  s.steps_t1 = steps_t1;
  return s;
}

SaSchedule SaSchedule::with_alpha(Real t0, Real alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("SA alpha must lie in [0, 1]");
  SaSchedule s;
  s.t0 = t0;
  s.alpha = alpha;
  s.steps_t1 = 0;
  return s;
}

Real sa_alpha(Real t0, int steps_t1) {
  if (!(t0 >= 1.0)) throw ParameterError("sa_alpha: t0 must be >= 1");
  if (steps_t1 < 1) throw ParameterError("sa_alpha: steps_t1 must be >= 1");
  return std::pow(1.0 / t0, 1.0 / static_cast<Real>(steps_t1));
}

bool sa_accept(Real cost_new, Real cost_old, Real temperature, Real mu) {
  if (!(mu > 0.0 && mu <= 1.0)) throw ParameterError("sa_accept: mu must lie in (0, 1]");
  return cost_new < cost_old - temperature * std::log(mu);
}

}  // namespace cdcp
