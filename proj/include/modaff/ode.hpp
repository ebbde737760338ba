#pragma once

// Dormand-Prince 5(4) with PI step control, used by the Riccati and chain
// Cauchy solvers on realified complex systems.

#include "modaff/core.hpp"

namespace modaff {

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dy)>;

struct OdeOptions {
  Tolerance tol;
  double h_init = 0.0;       // 0: automatic
  double h_max = 0.0;        // 0: unbounded
  std::size_t max_steps = 2'000'000;
  /// Stop (and report) when ||y||_inf exceeds this value.
  double ceiling = std::numeric_limits<double>::infinity();
  /// Extra times the integrator must land on exactly (sorted, inside (t0, t1]).
  std::vector<double> stops;
  /// Control the local error per unit step (err <= tol * h / span) instead of
  /// per step. Makes the global error proportional to the tolerance.
  bool per_unit_step = true;
};

struct OdeStep {
  double t;
  Vec y;
  Vec dy;
};

struct OdeResult {
  std::vector<OdeStep> steps;   // includes the initial point
  bool hit_ceiling = false;     // integration stopped early at steps.back().t
  double t_exceed = 0.0;        // time at which the ceiling was crossed (upper bracket)
  std::size_t rejected = 0;
};

OdeResult dopri5(const OdeRhs& f, double t0, const Vec& y0, double t1, const OdeOptions& opt);

/// Cubic Hermite interpolation between two stored steps.
Vec hermite(const OdeStep& a, const OdeStep& b, double t);

/// Locate the step interval containing t and interpolate.
Vec dense_eval(const std::vector<OdeStep>& steps, double t);

}  // namespace modaff
