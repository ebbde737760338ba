#include "modaff/modulator.hpp"

#include <sstream>

namespace modaff {

namespace {

constexpr double kTailQuantile = 5.73;   // two-sided normal tail mass ~1e-8

bool degenerate(double sigma) { return std::abs(sigma) <= 1e-14; }

}  // namespace

int FiniteChainModulator::index_of(double x) const {
  for (int i = 0; i < size(); ++i) {
    if (std::abs(states[i] - x) <= 1e-9 * std::max(1.0, std::abs(x))) return i;
  }
  throw StructuralError("value " + std::to_string(x) + " is not a state of the chain");
}

FiniteChainModulator make_chain(std::vector<double> states, Mat Q, std::vector<std::string> labels) {
  const int d = static_cast<int>(states.size());
  if (d == 0) throw StructuralError("chain needs at least one state");
  if (Q.rows() != d || Q.cols() != d) throw StructuralError("generator matrix must be d x d for d states");
  if (!labels.empty() && static_cast<int>(labels.size()) != d) throw StructuralError("one label per chain state");
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    double scale = 0.0;
    for (int j = 0; j < d; ++j) {
      if (i != j && !(Q(i, j) >= 0.0)) {
        std::ostringstream os;
        os << "generator entry Q(" << i + 1 << "," << j + 1 << ") = " << Q(i, j) << " is negative";
        throw StructuralError(os.str());
      }
      row += Q(i, j);
      scale += std::abs(Q(i, j));
    }
    if (std::abs(row) > 1e-12 * std::max(1.0, scale)) {
      throw StructuralError("generator row " + std::to_string(i + 1) + " does not sum to zero");
    }
    for (int j = 0; j < i; ++j) {
      if (states[i] == states[j]) throw StructuralError("chain state values must be distinct");
    }
  }
  return FiniteChainModulator{std::move(states), std::move(labels), std::move(Q)};
}

Diffusion1DModulator make_jacobi(double kappa, double theta, double sigma) {
  if (!(kappa >= 0.0) || !(sigma >= 0.0) || !(theta >= 0.0 && theta <= 1.0)) {
    throw StructuralError("Jacobi modulator needs kappa >= 0, sigma >= 0, theta in [0, 1]");
  }
  Diffusion1DModulator m;
  m.kind = "jacobi";
  m.lo = 0.0;
  m.hi = 1.0;
  m.drift = [kappa, theta](double x) { return -kappa * (x - theta); };
  m.diffusion = [sigma](double x) { return sigma * std::sqrt(std::max(0.0, x * (1.0 - x))); };
  m.lo_boundary = m.hi_boundary = BoundaryKind::clamp;
  m.params = {{"kappa", kappa}, {"theta", theta}, {"sigma", sigma}};
  return m;
}

Diffusion1DModulator make_brownian(double mu, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(mu)) throw StructuralError("Brownian modulator needs sigma >= 0");
  Diffusion1DModulator m;
  m.kind = "brownian";
  m.lo = -std::numeric_limits<double>::infinity();
  m.hi = std::numeric_limits<double>::infinity();
  m.drift = [mu](double) { return mu; };
  m.diffusion = [sigma](double) { return sigma; };
  m.lo_boundary = m.hi_boundary = BoundaryKind::unattainable;
  m.params = {{"mu", mu}, {"sigma", sigma}};
  return m;
}

std::vector<double> probe_states(const Modulator& mod, int diffusion_points) {
  if (const auto* c = std::get_if<FiniteChainModulator>(&mod)) return c->states;
  const auto& d = std::get<Diffusion1DModulator>(mod);
  const double lo = std::isfinite(d.lo) ? d.lo : -4.0;
  const double hi = std::isfinite(d.hi) ? d.hi : 4.0;
  std::vector<double> out;
  for (int k = 0; k < diffusion_points; ++k) out.push_back(lo + (hi - lo) * k / (diffusion_points - 1));
  if (lo < 0.0 && hi > 0.0) out.push_back(0.0);
  return out;
}

Grid1D make_grid(const Diffusion1DModulator& mod, int nx, double T, double center, double radius) {
  if (nx < 2) throw NumericalError("diffusion mesh needs at least 2 intervals");
  Grid1D g;
  g.nx = nx;
  g.lo = mod.lo;
  g.hi = mod.hi;
  if (!mod.bounded()) {
    // Largest diffusion coefficient over a generous window around the center.
    double smax = 0.0;
    double mu_max = 0.0;
    const double w = radius + 10.0;
    for (int k = 0; k <= 200; ++k) {
      const double x = center - w + 2.0 * w * k / 200.0;
      smax = std::max(smax, mod.diffusion(x));
      mu_max = std::max(mu_max, std::abs(mod.drift(x)));
    }
    const double reach = radius + kTailQuantile * smax * std::sqrt(std::max(T, 0.0)) + mu_max * T;
    if (!std::isfinite(mod.lo)) g.lo = center - reach;
    if (!std::isfinite(mod.hi)) g.hi = center + reach;
    g.truncated = true;
  }
  if (!(g.hi > g.lo)) throw NumericalError("empty diffusion mesh");
  return g;
}

GeneratorStencil build_stencil(const Diffusion1DModulator& mod, const Grid1D& grid) {
  const int N = grid.nx;
  if (N < 2) throw NumericalError("diffusion mesh needs at least 2 intervals");
  const double h = grid.h();
  GeneratorStencil s;
  s.lower = Vec::Zero(N + 1);
  s.diag = Vec::Zero(N + 1);
  s.upper = Vec::Zero(N + 1);
  for (int j = 1; j < N; ++j) {
    const double x = grid.x(j);
    const double mu = mod.drift(x);
    const double sig = mod.diffusion(x);
    const double D = 0.5 * sig * sig;
    s.lower[j] = D / (h * h) - mu / (2 * h);
    s.diag[j] = -2.0 * D / (h * h);
    s.upper[j] = D / (h * h) + mu / (2 * h);
    if (D > 0.0) s.max_peclet = std::max(s.max_peclet, std::abs(mu) * h / (2.0 * D));
  }
  // Left end.
  {
    const double x = grid.x(0);
    const double mu = mod.drift(x);
    const double sig = mod.diffusion(x);
    if (degenerate(sig) && !grid.truncated) {
      s.diag[0] = -3.0 * mu / (2 * h);
      s.upper[0] = 4.0 * mu / (2 * h);
      s.extra_first = -mu / (2 * h);
    } else {
      const double D = 0.5 * sig * sig;
      s.diag[0] = -2.0 * D / (h * h);
      s.upper[0] = 2.0 * D / (h * h);
    }
  }
  // Right end.
  {
    const double x = grid.x(N);
    const double mu = mod.drift(x);
    const double sig = mod.diffusion(x);
    if (degenerate(sig) && !grid.truncated) {
      s.diag[N] = 3.0 * mu / (2 * h);
      s.lower[N] = -4.0 * mu / (2 * h);
      s.extra_last = mu / (2 * h);
    } else {
      const double D = 0.5 * sig * sig;
      s.diag[N] = -2.0 * D / (h * h);
      s.lower[N] = 2.0 * D / (h * h);
    }
  }
  return s;
}

Vec apply_generator(const FiniteChainModulator& mod, const Vec& f) {
  if (f.size() != mod.size()) throw StructuralError("function length differs from the number of chain states");
  return mod.Q * f;
}

CVec apply_generator(const FiniteChainModulator& mod, const CVec& f) {
  if (f.size() != mod.size()) throw StructuralError("function length differs from the number of chain states");
  return mod.Q.cast<Complex>() * f;
}

CVec apply_stencil(const GeneratorStencil& s, const CVec& f) {
  const int N = static_cast<int>(s.diag.size()) - 1;
  if (f.size() != N + 1) throw StructuralError("function length differs from the mesh size");
  CVec out(N + 1);
  for (int j = 0; j <= N; ++j) {
    Complex v = s.diag[j] * f[j];
    if (j > 0) v += s.lower[j] * f[j - 1];
    if (j < N) v += s.upper[j] * f[j + 1];
    out[j] = v;
  }
  out[0] += s.extra_first * f[2];
  out[N] += s.extra_last * f[N - 2];
  return out;
}

Vec apply_generator(const Diffusion1DModulator& mod, const Grid1D& grid, const Vec& f) {
  if (f.size() != grid.nodes()) throw StructuralError("function length differs from the mesh size");
  return apply_stencil(build_stencil(mod, grid), f.cast<Complex>()).real();
}

FiniteChainModulator discretize_to_chain(const Diffusion1DModulator& mod, const Grid1D& grid) {
  const int N = grid.nx;
  const double h = grid.h();
  Mat Q = Mat::Zero(N + 1, N + 1);
  std::vector<double> states;
  for (int j = 0; j <= N; ++j) {
    const double x = grid.x(j);
    states.push_back(x);
    const double mu = mod.drift(x);
    const double sig = mod.diffusion(x);
    const double D = 0.5 * sig * sig / (h * h);
    double up = D + mu / (2 * h);
    double down = D - mu / (2 * h);
    if (up < 0.0 || down < 0.0) {
      up = D + std::max(mu, 0.0) / h;
      down = D + std::max(-mu, 0.0) / h;
    }
    if (j == 0) {
      up = D + std::max(mu, 0.0) / h;
      down = 0.0;
    }
    if (j == N) {
      down = D + std::max(-mu, 0.0) / h;
      up = 0.0;
    }
    if (j < N) Q(j, j + 1) = up;
    if (j > 0) Q(j, j - 1) = down;
    Q(j, j) = -(up + down);
  }
  return make_chain(std::move(states), std::move(Q));
}

std::vector<double> time_grid(double T, double dt) {
  if (!(dt > 0.0)) throw StructuralError("time step must be positive");
  if (!(T >= 0.0)) throw StructuralError("horizon must be nonnegative");
  std::vector<double> t{0.0};
  const auto steps = static_cast<long>(std::floor(T / dt + 1e-9));
  for (long k = 1; k <= steps; ++k) t.push_back(std::min(T, k * dt));
  if (T - t.back() > 1e-12 * std::max(1.0, T)) t.push_back(T);
  else t.back() = T;
  return t;
}

double ModulatorPath::at(double s) const {
  if (exact_jumps) {
    auto it = std::upper_bound(switch_t.begin(), switch_t.end(), s);
    if (it == switch_t.begin()) return start;
    return switch_x[static_cast<std::size_t>(it - switch_t.begin()) - 1];
  }
  auto it = std::upper_bound(t.begin(), t.end(), s + 1e-12);
  if (it == t.begin()) return x.front();
  return x[static_cast<std::size_t>(it - t.begin()) - 1];
}

ModulatorPath simulate_modulator(const Modulator& mod, double x0, double T, double dt, RngStream& rng) {
  ModulatorPath path;
  path.t = time_grid(T, dt);
  if (const auto* chain = std::get_if<FiniteChainModulator>(&mod)) {
    path.exact_jumps = true;
    path.start = x0;
    int i = chain->index_of(x0);
    double t = 0.0;
    for (;;) {
      const double rate = -chain->Q(i, i);
      if (!(rate > 0.0)) break;
      t += rng.exponential() / rate;
      if (t > T) break;
      double r = rng.uniform() * rate;
      int next = -1;
      for (int j = 0; j < chain->size(); ++j) {
        if (j == i) continue;
        const double q = chain->Q(i, j);
        if (q <= 0.0) continue;
        next = j;
        if (r < q) break;
        r -= q;
      }
      i = next;
      path.switch_t.push_back(t);
      path.switch_x.push_back(chain->states[i]);
    }
    path.x.reserve(path.t.size());
    for (double s : path.t) path.x.push_back(path.at(s));
    return path;
  }
  const auto& diff = std::get<Diffusion1DModulator>(mod);
  if (!diff.contains(x0)) throw StructuralError("initial modulator state outside the diffusion domain");
  path.start = x0;
  path.x.reserve(path.t.size());
  double x = x0;
  path.x.push_back(x);
  for (std::size_t k = 1; k < path.t.size(); ++k) {
    const double h = path.t[k] - path.t[k - 1];
    x += diff.drift(x) * h + diff.diffusion(x) * std::sqrt(h) * rng.normal();
    x = std::clamp(x, diff.lo, diff.hi);
    path.x.push_back(x);
  }
  return path;
}

}  // namespace modaff
