#pragma once

#include "cdcp/types.hpp"

namespace cdcp {

// Temperature t0 * alpha^t at step t.
struct SaSchedule {
  Real t0 = 100.0;
  Real alpha = 0.01;
  int t = 0;
  int steps_t1 = 1;

  Real temperature() const { return temperature_at(t); }
  Real temperature_at(int step) const;

  // alpha chosen so that the temperature reaches 1 after steps_t1 steps.
  static SaSchedule reaching_one(Real t0, int steps_t1);
  static SaSchedule with_alpha(Real t0, Real alpha);
};

// alpha = (1 / t0)^(1 / steps_t1)
Real sa_alpha(Real t0, int steps_t1);

// Accept iff cost_new < cost_old - temperature * ln(mu), mu in (0, 1].
bool sa_accept(Real cost_new, Real cost_old, Real temperature, Real mu);
inline bool sa_accept(Real cost_new, Real cost_old, const SaSchedule& schedule, Real mu) {
  return sa_accept(cost_new, cost_old, schedule.temperature(), mu);
}

}  // namespace cdcp
