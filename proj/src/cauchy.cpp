#include "modaff/cauchy.hpp"

#include "modaff/csv.hpp"
#include "modaff/parallel.hpp"

#include <sstream>

namespace modaff {

namespace {

Vec realify(const CVec& z) {
  Vec out(2 * z.size());
  for (int i = 0; i < z.size(); ++i) {
    out[2 * i] = z[i].real();
    out[2 * i + 1] = z[i].imag();
  }
  return out;
}

CVec complexify(const Vec& v) {
  CVec out(v.size() / 2);
  for (int i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

template <class T>
bool field_affine(const XField<T>& f) {
  return f.kind() == XField<T>::Kind::constant || f.kind() == XField<T>::Kind::affine;
}

void check_horizon(const RiccatiPath& rp, double T) {
  if (!(T >= 0.0)) throw StructuralError("Cauchy horizon must be nonnegative");
  if (rp.horizon() < T * (1.0 - 1e-12)) {
    throw StructuralError("Riccati path covers [0, " + std::to_string(rp.horizon()) + "], shorter than the horizon " +
                          std::to_string(T));
  }
}

/// Solve a tridiagonal system in place (Thomas algorithm).
void thomas(std::vector<Complex>& lower, std::vector<Complex>& diag, std::vector<Complex>& upper,
            std::vector<Complex>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const Complex w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace

std::string to_string(CauchyMethod m) {
  switch (m) {
    case CauchyMethod::ode:
      return "ode";
    case CauchyMethod::pde:
      return "pde";
    case CauchyMethod::feynman_kac:
      return "feynman-kac";
  }
  return "unknown";
}

Complex CauchySolution::at(std::size_t k, double x) const {
  if (states.size() == 1) return values(static_cast<Eigen::Index>(k), 0);
  auto it = std::lower_bound(states.begin(), states.end(), x);
  const double tol = 1e-9 * std::max(1.0, std::abs(x));
  if (it != states.end() && std::abs(*it - x) <= tol) return values(static_cast<Eigen::Index>(k), it - states.begin());
  if (it != states.begin() && std::abs(*(it - 1) - x) <= tol) {
    return values(static_cast<Eigen::Index>(k), it - states.begin() - 1);
  }
  if (method == CauchyMethod::feynman_kac || it == states.begin() || it == states.end()) {
    throw StructuralError("state " + std::to_string(x) + " is not covered by the Cauchy solution");
  }
  const auto j = it - states.begin();
  const double w = (x - states[j - 1]) / (states[j] - states[j - 1]);
  return (1.0 - w) * values(static_cast<Eigen::Index>(k), j - 1) + w * values(static_cast<Eigen::Index>(k), j);
}

double CauchySolution::stderr_at_end(double x) const {
  if (stderr_.size() == 0) return 0.0;
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (std::abs(states[j] - x) <= 1e-9 * std::max(1.0, std::abs(x))) {
      return stderr_(stderr_.rows() - 1, static_cast<Eigen::Index>(j));
    }
  }
  throw StructuralError("state " + std::to_string(x) + " is not a Feynman-Kac start point");
}

Reaction::Reaction(const XAdmissibleParams& p, double l) : p_(&p), l_(l) {
  affine_ = field_affine(p.a) && field_affine(p.b) && field_affine(p.c) && p.m_kernel.empty();
}

Complex Reaction::operator()(double x, const CVec& psi) const { return eval_F(*p_, x, psi) + l_; }

std::pair<Complex, Complex> Reaction::affine_parts(const CVec& psi) const {
  const Complex f0 = (*this)(0.0, psi);
  const Complex f1 = (*this)(1.0, psi);
  return {f0, f1 - f0};
}

// ---------------------------------------------------------------------------

CauchySolution solve_cauchy_chain(const XAdmissibleParams& p, const FiniteChainModulator& mod,
                                  std::shared_ptr<const RiccatiPath> rp, double T, const ChainCauchyOptions& opt) {
  check_horizon(*rp, T);
  const int d = mod.size();
  const Reaction F(p, rp->discount().l);
  CauchySolution sol;
  sol.u0 = rp->u0();
  sol.riccati = rp;
  sol.method = CauchyMethod::ode;
  sol.states = mod.states;

  CVec phi0(d);
  for (int i = 0; i < d; ++i) phi0[i] = std::exp(opt.q * mod.states[i]);
  const CMat Qc = mod.Q.cast<Complex>();
  auto rhs = [&](double t, const Vec& y, Vec& dy) {
    const CVec phi = complexify(y);
    const CVec psi = rp->value(std::min(t, rp->horizon()));
    CVec out = Qc * phi;
    for (int i = 0; i < d; ++i) out[i] += F(mod.states[i], psi) * phi[i];
    dy = realify(out);
  };
  OdeOptions o;
  o.tol = opt.tol;
  o.stops = opt.output_times;
  std::sort(o.stops.begin(), o.stops.end());
  const OdeResult res = dopri5(rhs, 0.0, realify(phi0), T, o);
  if (res.hit_ceiling) throw NumericalError("chain Cauchy solver could not meet the tolerance");
  sol.values.resize(static_cast<Eigen::Index>(res.steps.size()), d);
  for (std::size_t k = 0; k < res.steps.size(); ++k) {
    sol.times.push_back(res.steps[k].t);
    sol.values.row(static_cast<Eigen::Index>(k)) = complexify(res.steps[k].y).transpose();
  }
  // The first row is the initial datum, copied exactly.
  sol.values.row(0) = phi0.transpose();
  sol.error_estimate = opt.tol.abs + opt.tol.rel * sol.values.cwiseAbs().maxCoeff();
  sol.metadata["rejected_steps"] = static_cast<double>(res.rejected);
  return sol;
}

// ---------------------------------------------------------------------------

CauchySolution solve_cauchy_pde(const XAdmissibleParams& p, const Diffusion1DModulator& mod,
                                std::shared_ptr<const RiccatiPath> rp, double T, const PdeGrid& pg,
                                const PdeCauchyOptions& opt) {
  check_horizon(*rp, T);
  if (pg.nx < 8 || pg.nt < 8) {
    throw NumericalError("PDE mesh too coarse: need at least 8 space and 8 time intervals (got " +
                         std::to_string(pg.nx) + " x " + std::to_string(pg.nt) + ")");
  }
  const Grid1D grid = make_grid(mod, pg.nx, T, pg.center, pg.radius);
  const GeneratorStencil S = build_stencil(mod, grid);
  const int N = grid.nx;
  const Reaction F(p, rp->discount().l);

  CauchySolution sol;
  sol.u0 = rp->u0();
  sol.riccati = rp;
  sol.method = CauchyMethod::pde;
  for (int j = 0; j <= N; ++j) sol.states.push_back(grid.x(j));
  sol.metadata["h"] = grid.h();
  sol.metadata["dt"] = T / pg.nt;
  sol.metadata["max_peclet"] = S.max_peclet;
  if (grid.truncated) {
    sol.metadata["domain_lo"] = grid.lo;
    sol.metadata["domain_hi"] = grid.hi;
  }
  if (S.max_peclet > 1.0) {
    std::ostringstream os;
    os << "cell Peclet number " << S.max_peclet << " exceeds 1; refine nx to avoid oscillations";
    sol.warnings.push_back(os.str());
  }

  CVec phi(N + 1);
  for (int j = 0; j <= N; ++j) phi[j] = std::exp(opt.q * grid.x(j));
  sol.values.resize(pg.nt + 1, N + 1);
  sol.values.row(0) = phi.transpose();
  sol.times.push_back(0.0);
  if (T == 0.0) {
    sol.values.conservativeResize(1, N + 1);
    return sol;
  }

  const double dt = T / pg.nt;
  double sup_F = 0.0;
  std::vector<Complex> react(N + 1);
  auto eval_reaction = [&](double t, double step) {
    const CVec psi = rp->value(std::min(t, rp->horizon()));
    if (F.affine_in_x()) {
      const auto [f0, f1] = F.affine_parts(psi);
      for (int j = 0; j <= N; ++j) react[j] = f0 + grid.x(j) * f1;
    } else {
      for (int j = 0; j <= N; ++j) react[j] = F(grid.x(j), psi);
    }
    for (const auto& r : react) sup_F = std::max(sup_F, std::abs(r));
    double local = 0.0;
    for (const auto& r : react) local = std::max(local, std::abs(r));
    if (step * local > opt.max_reaction_step) {
      std::ostringstream os;
      os << "PDE time step too coarse: dt * sup|F| = " << step * local << " > " << opt.max_reaction_step
         << " near t = " << t;
      throw NumericalError(os.str());
    }
  };

  std::vector<Complex> lo(N + 1), di(N + 1), up(N + 1), rhs(N + 1);
  // theta = 1 (implicit Euler) or 1/2 (Crank-Nicolson) step of size k.
  auto step = [&](double k, double theta) {
    if (theta < 1.0) {
      const CVec Sphi = apply_stencil(S, phi);
      for (int j = 0; j <= N; ++j) rhs[j] = phi[j] + (1.0 - theta) * k * (Sphi[j] + react[j] * phi[j]);
    } else {
      for (int j = 0; j <= N; ++j) rhs[j] = phi[j];
    }
    for (int j = 0; j <= N; ++j) {
      lo[j] = -theta * k * S.lower[j];
      di[j] = 1.0 - theta * k * (S.diag[j] + react[j]);
      up[j] = -theta * k * S.upper[j];
    }
    // Fold the extra one-sided entries into the tridiagonal structure.
    const Complex e0 = -theta * k * S.extra_first;
    if (e0 != 0.0) {
      if (std::abs(up[1]) > 1e-300) {
        const Complex f = e0 / up[1];
        di[0] -= f * lo[1];
        up[0] -= f * di[1];
        rhs[0] -= f * rhs[1];
      }
    }
    const Complex eN = -theta * k * S.extra_last;
    if (eN != 0.0) {
      if (std::abs(lo[N - 1]) > 1e-300) {
        const Complex f = eN / lo[N - 1];
        lo[N] -= f * di[N - 1];
        di[N] -= f * up[N - 1];
        rhs[N] -= f * rhs[N - 1];
      }
    }
    thomas(lo, di, up, rhs);
    for (int j = 0; j <= N; ++j) phi[j] = rhs[j];
  };

  const int half_steps = std::max(0, opt.rannacher_half_steps);
  const int startup_full = std::min(pg.nt, half_steps / 2);
  double t = 0.0;
  for (int n = 0; n < pg.nt; ++n) {
    if (n < startup_full) {
      for (int s = 0; s < 2; ++s) {
        eval_reaction(t + 0.5 * dt * (s + 1), 0.5 * dt);
        step(0.5 * dt, 1.0);
      }
    } else {
      eval_reaction(t + 0.5 * dt, dt);
      step(dt, 0.5);
    }
    t = (n + 1 == pg.nt) ? T : (n + 1) * dt;
    sol.times.push_back(t);
    sol.values.row(n + 1) = phi.transpose();
    if (!phi.allFinite()) throw NumericalError("PDE solution became non-finite");
  }
  sol.metadata["sup_abs_F"] = sup_F;
  // Crude a-posteriori error scale: one-step change at the finest resolution.
  sol.error_estimate = dt * dt * sup_F * sup_F;
  return sol;
}

// ---------------------------------------------------------------------------

CauchySolution solve_cauchy_feynman_kac(const XAdmissibleParams& p, const Modulator& mod,
                                        std::shared_ptr<const RiccatiPath> rp, double T,
                                        const FeynmanKacOptions& opt) {
  check_horizon(*rp, T);
  if (opt.n_paths == 0) throw StructuralError("Feynman-Kac estimator needs at least one path");
  if (!(opt.dt > 0.0)) throw StructuralError("Feynman-Kac time step must be positive");
  std::vector<double> times = opt.times.empty() ? std::vector<double>{T} : opt.times;
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw StructuralError("Feynman-Kac time outside [0, T]");
  }
  const std::vector<double> starts = opt.start_states.empty() ? probe_states(mod) : opt.start_states;
  const double tmax = times.back();
  const Reaction F(p, rp->discount().l);
  const double l = rp->discount().l;
  (void)l;
  const auto* chain = std::get_if<FiniteChainModulator>(&mod);

  // Per time: the integration nodes s_k on [0, t] and reaction data at psi(t - s_k).
  struct NodeData {
    std::vector<double> s;
    std::vector<CVec> psi;
    std::vector<Complex> f0, f1;       // affine fast path
    std::vector<std::vector<Complex>> chain_f;   // [k][state]
  };
  const std::vector<double> grid = time_grid(tmax, opt.dt);
  std::vector<NodeData> nodes(times.size());
  for (std::size_t a = 0; a < times.size(); ++a) {
    auto& nd = nodes[a];
    const double t = times[a];
    for (double s : grid) {
      if (s < t - 1e-12 * std::max(1.0, t)) nd.s.push_back(s);
    }
    nd.s.push_back(t);
    for (double s : nd.s) nd.psi.push_back(rp->value(std::max(0.0, t - s)));
    if (chain) {
      for (const auto& psi : nd.psi) {
        std::vector<Complex> row;
        for (double x : chain->states) row.push_back(F(x, psi));
        nd.chain_f.push_back(std::move(row));
      }
    } else if (F.affine_in_x()) {
      for (const auto& psi : nd.psi) {
        const auto [f0, f1] = F.affine_parts(psi);
        nd.f0.push_back(f0);
        nd.f1.push_back(f1);
      }
    }
  }

  const std::size_t n_paths = opt.n_paths;
  const std::size_t total = starts.size() * n_paths;
  std::vector<Complex> results(total * times.size());
  parallel_for(total, opt.threads, [&](std::size_t idx) {
    const std::size_t a_start = idx / n_paths;
    const double x0 = starts[a_start];
    RngStream rng(opt.seed, idx);
    const ModulatorPath path = simulate_modulator(mod, x0, tmax, opt.dt, rng);
    for (std::size_t a = 0; a < times.size(); ++a) {
      const auto& nd = nodes[a];
      const double t = times[a];
      Complex integral = 0.0;
      if (chain) {
        // Split [0, t] at the switch times; the state is constant on each piece.
        std::size_t k = 0;
        double piece_start = 0.0;
        int state = chain->index_of(x0);
        std::size_t sw = 0;
        while (piece_start < t) {
          const double piece_end =
              (sw < path.switch_t.size() && path.switch_t[sw] < t) ? path.switch_t[sw] : t;
          const double x = chain->states[state];
          // Left end value.
          double s_prev = piece_start;
          Complex f_prev = (k < nd.s.size() && nd.s[k] == piece_start) ? nd.chain_f[k][state]
                                                                       : F(x, rp->value(t - piece_start));
          while (k < nd.s.size() && nd.s[k] <= piece_start) ++k;
          while (k < nd.s.size() && nd.s[k] < piece_end) {
            const Complex f = nd.chain_f[k][state];
            integral += 0.5 * (nd.s[k] - s_prev) * (f + f_prev);
            s_prev = nd.s[k];
            f_prev = f;
            ++k;
          }
          const Complex f_end = (k < nd.s.size() && nd.s[k] == piece_end) ? nd.chain_f[k][state]
                                                                           : F(x, rp->value(t - piece_end));
          integral += 0.5 * (piece_end - s_prev) * (f_end + f_prev);
          if (piece_end >= t) break;
          state = chain->index_of(path.switch_x[sw]);
          ++sw;
          piece_start = piece_end;
        }
      } else {
        auto f_at = [&](std::size_t k) {
          const double x = (k + 1 == nd.s.size()) ? path.at(t) : path.x[k];
          if (F.affine_in_x()) return nd.f0[k] + x * nd.f1[k];
          return F(x, nd.psi[k]);
        };
        Complex prev = f_at(0);
        for (std::size_t k = 1; k < nd.s.size(); ++k) {
          const Complex f = f_at(k);
          integral += 0.5 * (nd.s[k] - nd.s[k - 1]) * (f + prev);
          prev = f;
        }
      }
      Complex value = std::exp(integral);
      if (opt.q != 0.0) value *= std::exp(opt.q * path.at(t));
      results[idx * times.size() + a] = value;
    }
  });

  CauchySolution sol;
  sol.u0 = rp->u0();
  sol.riccati = rp;
  sol.method = CauchyMethod::feynman_kac;
  sol.times = times;
  sol.states = starts;
  sol.values.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(starts.size()));
  sol.stderr_.resize(sol.values.rows(), sol.values.cols());
  for (std::size_t b = 0; b < starts.size(); ++b) {
    for (std::size_t a = 0; a < times.size(); ++a) {
      Complex sum = 0.0;
      for (std::size_t i = 0; i < n_paths; ++i) sum += results[(b * n_paths + i) * times.size() + a];
      const Complex mean = sum / static_cast<double>(n_paths);
      double var = 0.0;
      for (std::size_t i = 0; i < n_paths; ++i) var += std::norm(results[(b * n_paths + i) * times.size() + a] - mean);
      var = n_paths > 1 ? var / static_cast<double>(n_paths - 1) : 0.0;
      sol.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = mean;
      sol.stderr_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = std::sqrt(var / static_cast<double>(n_paths));
    }
  }
  sol.error_estimate = sol.stderr_.maxCoeff();
  sol.metadata["n_paths"] = static_cast<double>(n_paths);
  sol.metadata["dt"] = opt.dt;
  return sol;
}

void write_cauchy_csv(const CauchySolution& sol, const std::string& path) {
  CsvWriter w(path, {"t", "x", "re", "im", "stderr"});
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    for (std::size_t j = 0; j < sol.states.size(); ++j) {
      const Complex v = sol.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      const double se = sol.stderr_.size() ? sol.stderr_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) : 0.0;
      w.row({fmt(sol.times[k]), fmt(sol.states[j]), fmt(v.real()), fmt(v.imag()), fmt(se)});
    }
  }
}

}  // namespace modaff
