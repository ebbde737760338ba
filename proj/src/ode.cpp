#include "modaff/ode.hpp"

#include <limits>

namespace modaff {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

double err_norm(const Vec& err, const Vec& y0, const Vec& y1, const Tolerance& tol) {
  double s = 0.0;
  for (int i = 0; i < err.size(); ++i) {
    const double sc = tol.abs + tol.rel * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    s += r * r;
  }
  return err.size() ? std::sqrt(s / static_cast<double>(err.size())) : 0.0;
}

}  // namespace

OdeResult dopri5(const OdeRhs& f, double t0, const Vec& y0, double t1, const OdeOptions& opt) {
  OdeResult res;
  const int n = static_cast<int>(y0.size());
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), ytmp(n), ynew(n), err(n);
  y = y0;
  f(t0, y, k1);
  res.steps.push_back({t0, y, k1});
  if (t1 <= t0 || n == 0) {
    if (n == 0 && t1 > t0) res.steps.push_back({t1, y, k1});
    return res;
  }

  double h = opt.h_init;
  if (h <= 0.0) {
    // Hairer's starting step heuristic.
    Vec sc = (y.cwiseAbs() * opt.tol.rel).array() + opt.tol.abs;
    const double d0 = std::sqrt((y.array() / sc.array()).square().mean());
    const double d1 = std::sqrt((k1.array() / sc.array()).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    ytmp = y + h0 * k1;
    f(t0 + h0, ytmp, k2);
    const double d2 = std::sqrt(((k2 - k1).array() / sc.array()).square().mean()) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min(100 * h0, h1);
  }
  if (opt.h_max > 0.0) h = std::min(h, opt.h_max);

  std::size_t next_stop = 0;
  double t = t0;
  double err_prev = 1e-4;
  const double span = t1 - t0;
  for (std::size_t step = 0; step < opt.max_steps; ++step) {
    while (next_stop < opt.stops.size() && opt.stops[next_stop] <= t + 1e-14 * span) ++next_stop;
    double target = t1;
    if (next_stop < opt.stops.size() && opt.stops[next_stop] < t1) target = opt.stops[next_stop];
    bool last = false;
    if (t + h >= target - 1e-14 * span) {
      h = target - t;
      last = true;
    }
    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + h, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = err_norm(err, y, ynew, opt.tol);
    if (opt.per_unit_step) en *= span / h;
    if (!std::isfinite(en) || !ynew.allFinite()) en = 1e10;

    if (en <= 1.0) {
      const double tn = last ? target : t + h;
      if (ynew.lpNorm<Eigen::Infinity>() > opt.ceiling) {
        res.hit_ceiling = true;
        res.t_exceed = tn;
        return res;
      }
      t = tn;
      y = ynew;
      k1 = k7;
      res.steps.push_back({t, y, k1});
      if (t >= t1 - 1e-14 * span) return res;
      // PI controller
      const double q = opt.per_unit_step ? 4.0 : 5.0;
      double fac = 0.9 * std::pow(en, -0.7 / q) * std::pow(err_prev, 0.4 / q);
      fac = std::clamp(fac, 0.2, 10.0);
      err_prev = std::max(en, 1e-4);
      if (!last) h *= fac;
      else h = std::max(h, (t1 - t) * 1e-3) * fac;
    } else {
      ++res.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, opt.per_unit_step ? -0.25 : -0.2));
      if (h < 1e-15 * std::max(1.0, std::abs(t))) {
        // The solution is leaving every bounded set (or the tolerance is unreachable).
        res.hit_ceiling = true;
        res.t_exceed = t + h;
        return res;
      }
    }
    if (opt.h_max > 0.0) h = std::min(h, opt.h_max);
  }
  throw NumericalError("ODE integrator exceeded the step limit");
}

Vec hermite(const OdeStep& a, const OdeStep& b, double t) {
  const double h = b.t - a.t;
  if (h <= 0.0) return a.y;
  const double s = (t - a.t) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * a.y + h10 * h * a.dy + h01 * b.y + h11 * h * b.dy;
}

Vec dense_eval(const std::vector<OdeStep>& steps, double t) {
  if (steps.empty()) throw StructuralError("dense_eval on an empty trajectory");
  if (t <= steps.front().t) return steps.front().y;
  if (t >= steps.back().t) return steps.back().y;
  auto it = std::upper_bound(steps.begin(), steps.end(), t, [](double v, const OdeStep& s) { return v < s.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (t == a.t) return a.y;
  return hermite(a, b, t);
}

}  // namespace modaff
