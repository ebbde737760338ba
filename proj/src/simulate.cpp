#include "modaff/simulate.hpp"

#include "modaff/csv.hpp"
#include "modaff/parallel.hpp"

#include <limits>

namespace modaff {

namespace {

void require_no_killing(const XAdmissibleParams& p, const std::vector<double>& states, const char* what) {
  for (double x : states) {
    if (p.c(x) != 0.0) throw RefusalError(std::string(what) + " needs c = 0 (no killing)");
  }
  if (p.gamma.size() && !p.gamma.isZero(0.0)) throw RefusalError(std::string(what) + " needs gamma = 0 (no killing)");
}

/// L with L L^T = S for symmetric PSD S, dropping null directions.
Mat psd_factor(const Mat& S) {
  const int n = static_cast<int>(S.rows());
  if (S.isZero(0.0)) return Mat::Zero(n, 0);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  const Vec ev = es.eigenvalues();
  const double floor = 1e-14 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    if (ev[i] > floor) keep.push_back(i);
  }
  Mat L(n, static_cast<int>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) L.col(static_cast<int>(j)) = es.eigenvectors().col(keep[j]) * std::sqrt(ev[keep[j]]);
  return L;
}

Vec masked(Vec v, const IndexMask& mask) {
  for (int i = 0; i < v.size(); ++i) {
    if (!mask[i]) v[i] = 0.0;
  }
  return v;
}

void eval_into(const VectorField& f, double x, Vec& out) {
  switch (f.kind()) {
    case VectorField::Kind::constant:
      out = f.level();
      return;
    case VectorField::Kind::affine:
      out.noalias() = f.level() + x * f.slope();
      return;
    default:
      out = f(x);
  }
}

/// Coefficients that depend on the modulator state only.
struct Level {
  Vec b;
  Mat La;            // factor of 2 a(x)
  double rate = 0.0; // simulated jump rate of m(x, .)
  Vec comp;          // int chi_J dm over simulated jumps
};

class LevelSource {
 public:
  LevelSource(const XAdmissibleParams& p, const Modulator& mod) : p_(p) {
    if (const auto* chain = std::get_if<FiniteChainModulator>(&mod)) {
      chain_ = chain;
      for (double x : chain->states) table_.push_back(compute(x));
    }
    a_constant_ = p.a.kind() == MatrixField::Kind::constant;
    if (a_constant_) La_const_ = psd_factor(2.0 * p.a.level());
  }

  const Level& get(double x, Level& scratch) const {
    if (chain_) return table_[static_cast<std::size_t>(chain_->index_of(x))];
    eval_into(p_.b, x, scratch.b);
    scratch.La = a_constant_ ? La_const_ : psd_factor(2.0 * p_.a(x));
    if (p_.m_kernel.empty()) {
      scratch.rate = 0.0;
      scratch.comp = Vec::Zero(p_.shape.n);
    } else {
      scratch.rate = simulated_rate(p_.m_kernel, x);
      scratch.comp = masked(simulated_truncated_mean(p_.m_kernel, x, p_.shape.n), mask_J(p_.shape));
    }
    return scratch;
  }

 private:
  Level compute(double x) const {
    Level l;
    l.b = p_.b(x);
    l.La = psd_factor(2.0 * p_.a(x));
    l.rate = p_.m_kernel.empty() ? 0.0 : simulated_rate(p_.m_kernel, x);
    l.comp = p_.m_kernel.empty() ? Vec::Zero(p_.shape.n)
                                 : masked(simulated_truncated_mean(p_.m_kernel, x, p_.shape.n), mask_J(p_.shape));
    return l;
  }

  const XAdmissibleParams& p_;
  const FiniteChainModulator* chain_ = nullptr;
  std::vector<Level> table_;
  bool a_constant_ = false;
  Mat La_const_;
};

struct PathCounters {
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  std::size_t violations = 0;
};

}  // namespace

Characteristics characteristics_at(const XAdmissibleParams& p, double x, const Vec& y) {
  require_no_killing(p, {x}, "semimartingale characteristics");
  const auto& s = p.shape;
  if (y.size() != s.n) throw StructuralError("state y has the wrong dimension");
  Vec yp = y;
  for (int i = 0; i < s.m; ++i) yp[i] = std::max(yp[i], 0.0);

  Characteristics ch;
  // b~ adds int (chi_I, 0) dm; beta~ adds int chi_k dmu_l for k in I \ {l}.
  Vec btilde = p.b(x);
  Mat btil = p.beta;
  Vec chi_mean = Vec::Zero(s.n);
  double rate = 0.0;
  if (!p.m_kernel.empty()) {
    for (int k = 0; k < s.m; ++k) btilde[k] += truncated_mean(p.m_kernel, x, k);
    rate += simulated_rate(p.m_kernel, x);
    chi_mean += simulated_truncated_mean(p.m_kernel, x, s.n);
  }
  for (int l = 0; l < s.m; ++l) {
    if (p.mu[l].empty()) continue;
    for (int k = 0; k < s.m; ++k) {
      if (k != l) btil(k, l) += truncated_mean(p.mu[l], x, k);
    }
    rate += yp[l] * simulated_rate(p.mu[l], x);
    chi_mean += yp[l] * simulated_truncated_mean(p.mu[l], x, s.n);
  }
  ch.drift = btilde + btil * yp;
  ch.diffusion = 2.0 * p.a(x);
  for (int i = 0; i < s.m; ++i) ch.diffusion += 2.0 * yp[i] * p.alpha[i];
  ch.jump_rate = rate;
  ch.jump_chi_mean = chi_mean;
  return ch;
}

PathBundle simulate_paths(const XAdmissibleParams& p, const Modulator& mod, double x0, const Vec& y0, double T,
                          const SimulationOptions& opt) {
  const auto& s = p.shape;
  const int n = s.n;
  if (y0.size() != n) throw StructuralError("initial state y has the wrong dimension");
  if (!(T >= 0.0) || !(opt.dt > 0.0)) throw StructuralError("simulation needs T >= 0 and dt > 0");
  if (opt.n_paths == 0) throw StructuralError("simulation needs at least one path");
  for (int i = 0; i < s.m; ++i) {
    if (y0[i] < 0.0) throw StructuralError("initial state has a negative nonnegative-cone component");
  }
  if (opt.default_component >= n) throw StructuralError("default intensity component out of range");
  require_no_killing(p, probe_states(mod), "path simulation");
  require_sampler(p.m_kernel, "m");
  for (int i = 0; i < s.m; ++i) require_sampler(p.mu[i], "mu_" + std::to_string(i + 1));

  const LevelSource levels(p, mod);
  std::vector<Mat> L_alpha;
  std::vector<double> mu_rate;
  std::vector<Vec> mu_comp;
  for (int i = 0; i < s.m; ++i) {
    L_alpha.push_back(psd_factor(2.0 * p.alpha[i]));
    mu_rate.push_back(p.mu[i].empty() ? 0.0 : simulated_rate(p.mu[i], x0));
    mu_comp.push_back(p.mu[i].empty() ? Vec::Zero(n)
                                      : masked(simulated_truncated_mean(p.mu[i], x0, n), mask_J_plus(s, i)));
  }
  const bool has_jumps = !p.m_kernel.empty() || std::any_of(mu_rate.begin(), mu_rate.end(), [](double r) { return r > 0.0; });

  const std::vector<double> grid = time_grid(T, opt.dt);
  const std::size_t steps = grid.size() - 1;
  std::vector<std::size_t> report;
  const std::size_t stride =
      opt.report_dt > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.report_dt / opt.dt))) : 0;
  for (std::size_t k = 0; k <= steps; ++k) {
    if (k == 0 || k == steps || (stride && k % stride == 0)) report.push_back(k);
  }
  if (report.size() > 1 && report[report.size() - 1] == report[report.size() - 2]) report.pop_back();

  PathBundle b;
  b.n = n;
  b.n_paths = opt.n_paths;
  for (auto k : report) b.times.push_back(grid[k]);
  const std::size_t nt = b.times.size();
  b.x.assign(opt.n_paths * nt, 0.0);
  b.y.assign(opt.n_paths * nt * static_cast<std::size_t>(n), 0.0);
  if (opt.discount) b.discount.assign(opt.n_paths * nt, 0.0);
  if (opt.default_component >= 0) b.default_time.assign(opt.n_paths, std::numeric_limits<double>::infinity());
  b.stream_ids.resize(opt.n_paths);
  b.aborted.assign(opt.n_paths, 0);
  std::vector<PathCounters> counters(opt.n_paths);

  Vec lambda = Vec::Zero(n);
  double l0 = 0.0;
  if (opt.discount) {
    l0 = opt.discount->l;
    if (opt.discount->lambda.size() == n) lambda = opt.discount->lambda;
  }

  parallel_for(opt.n_paths, opt.threads, [&](std::size_t path) {
    RngStream rng(opt.seed, path);
    b.stream_ids[path] = path;
    const ModulatorPath xp = simulate_modulator(mod, x0, T, opt.dt, rng);
    const double E = opt.default_component >= 0 ? rng.exponential() : 0.0;
    double hazard = 0.0;
    double disc = 0.0;
    Vec y = y0, yp(n), drift(n), ynew(n), jacc(n), z(n);
    Level scratch;
    auto& cnt = counters[path];
    std::size_t next_report = 0;
    auto record = [&](std::size_t k) {
      const std::size_t slot = path * nt + next_report;
      b.x[slot] = xp.x[k];
      for (int i = 0; i < n; ++i) b.y[slot * n + i] = s.in_I(i) ? std::max(y[i], 0.0) : y[i];
      if (opt.discount) b.discount[slot] = disc;
      ++next_report;
    };
    record(0);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = grid[k];
      const double h = grid[k + 1] - t;
      const double x = xp.x[k];
      const Level& lv = levels.get(x, scratch);
      yp = y;
      for (int i = 0; i < s.m; ++i) yp[i] = std::max(yp[i], 0.0);

      drift.noalias() = p.beta * yp;
      drift += lv.b - lv.comp;
      for (int i = 0; i < s.m; ++i) {
        if (yp[i] > 0.0 && mu_rate[i] > 0.0) drift -= yp[i] * mu_comp[i];
      }
      ynew = y + h * drift;
      const double sh = std::sqrt(h);
      for (int j = 0; j < lv.La.cols(); ++j) ynew += (sh * rng.normal()) * lv.La.col(j);
      for (int i = 0; i < s.m; ++i) {
        if (yp[i] <= 0.0) continue;
        const double sc = std::sqrt(yp[i] * h);
        for (int j = 0; j < L_alpha[i].cols(); ++j) ynew += (sc * rng.normal()) * L_alpha[i].col(j);
      }

      if (has_jumps) {
        jacc.setZero();
        auto intensity = [&](double tau) {
          double r = lv.rate;
          for (int i = 0; i < s.m; ++i) {
            if (mu_rate[i] > 0.0) r += std::max(yp[i] + drift[i] * tau + jacc[i], 0.0) * mu_rate[i];
          }
          return r;
        };
        double tau = 0.0;
        for (;;) {
          const double bound = opt.headroom * intensity(tau);
          if (!(bound > 0.0)) break;
          tau += rng.exponential() / bound;
          if (tau >= h) break;
          ++cnt.candidates;
          const double lam = intensity(tau);
          if (lam > bound) ++cnt.violations;
          if (rng.uniform() * bound >= lam) continue;
          ++cnt.accepted;
          // Choose the kernel in proportion to its current rate.
          double pick = rng.uniform() * lam;
          int which = -1;
          if (pick >= lv.rate) {
            pick -= lv.rate;
            for (int i = 0; i < s.m; ++i) {
              const double ri = mu_rate[i] > 0.0 ? std::max(yp[i] + drift[i] * tau + jacc[i], 0.0) * mu_rate[i] : 0.0;
              which = i;
              if (pick < ri) break;
              pick -= ri;
            }
          }
          z = which < 0 ? sample_jump(p.m_kernel, x, n, rng) : sample_jump(p.mu[which], x, n, rng);
          jacc += z;
        }
        ynew += jacc;
      }

      if (opt.discount) disc += h * (l0 + lambda.dot(yp));
      if (opt.default_component >= 0 && !std::isfinite(b.default_time[path])) {
        const double rate = yp[opt.default_component];
        const double next = hazard + rate * h;
        if (next >= E && rate > 0.0) b.default_time[path] = t + (E - hazard) / rate;
        hazard = next;
      }
      y = ynew;
      if (!y.allFinite() || y.cwiseAbs().maxCoeff() > opt.guard) {
        b.aborted[path] = 1;
        for (; next_report < nt; ++next_report) {
          const std::size_t slot = path * nt + next_report;
          b.x[slot] = std::numeric_limits<double>::quiet_NaN();
          for (int i = 0; i < n; ++i) b.y[slot * n + i] = std::numeric_limits<double>::quiet_NaN();
          if (opt.discount) b.discount[slot] = std::numeric_limits<double>::quiet_NaN();
        }
        return;
      }
      if (next_report < nt && report[next_report] == k + 1) record(k + 1);
    }
  });

  PathCounters total;
  std::size_t aborted = 0;
  for (std::size_t i = 0; i < opt.n_paths; ++i) {
    total.candidates += counters[i].candidates;
    total.accepted += counters[i].accepted;
    total.violations += counters[i].violations;
    aborted += static_cast<std::size_t>(b.aborted[i]);
  }
  b.metadata["dt"] = opt.dt;
  b.metadata["n_paths"] = static_cast<double>(opt.n_paths);
  b.metadata["seed"] = static_cast<double>(opt.seed);
  b.metadata["thinning_headroom"] = opt.headroom;
  b.metadata["thinning_candidates"] = static_cast<double>(total.candidates);
  b.metadata["thinning_accepted"] = static_cast<double>(total.accepted);
  b.metadata["thinning_bound_violations"] = static_cast<double>(total.violations);
  b.metadata["aborted_paths"] = static_cast<double>(aborted);
  b.metadata["cgmy_cutoff"] = kCgmySmallJumpCutoff;
  return b;
}

EmpiricalEstimate empirical_transform(const PathBundle& b, const CVec& u, const EmpiricalOptions& opt) {
  if (b.n_paths == 0 || b.times.empty()) throw StructuralError("empirical transform of an empty bundle");
  if (u.size() != b.n) throw StructuralError("empirical transform exponent has the wrong dimension");
  const std::size_t k = opt.time_index.value_or(b.last());
  if (k >= b.times.size()) throw StructuralError("empirical transform time index out of range");
  if (opt.discounted && b.discount.empty()) throw StructuralError("bundle has no discount integral");
  if (opt.survival && b.default_time.empty()) throw StructuralError("bundle has no default times");
  std::vector<Complex> vals;
  vals.reserve(b.n_paths);
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    if (b.aborted[i]) continue;
    Complex v = std::exp(u.cwiseProduct(b.Y(i, k).cast<Complex>()).sum());
    if (opt.discounted) v *= std::exp(b.discount_integral(i, k));
    if (opt.survival && !(b.default_time[i] > b.times[k])) v = 0.0;
    vals.push_back(v);
  }
  EmpiricalEstimate est;
  if (vals.empty()) throw NumericalError("every simulated path was aborted");
  Complex sum = 0.0;
  for (const auto& v : vals) sum += v;
  est.mean = sum / static_cast<double>(vals.size());
  if (vals.size() > 1) {
    double var = 0.0;
    for (const auto& v : vals) var += std::norm(v - est.mean);
    var /= static_cast<double>(vals.size() - 1);
    est.stderr_ = std::sqrt(var / static_cast<double>(vals.size()));
  }
  return est;
}

void write_paths_csv(const PathBundle& b, const std::string& path, std::size_t max_paths) {
  std::vector<std::string> header{"path", "t", "x"};
  for (int i = 0; i < b.n; ++i) header.push_back("y" + std::to_string(i + 1));
  CsvWriter w(path, header);
  const std::size_t np = max_paths ? std::min(max_paths, b.n_paths) : b.n_paths;
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t k = 0; k < b.times.size(); ++k) {
      std::vector<std::string> row{std::to_string(b.stream_ids[i]), fmt(b.times[k]), fmt(b.X(i, k))};
      const auto y = b.Y(i, k);
      for (int c = 0; c < b.n; ++c) row.push_back(fmt(y[c]));
      w.row(row);
    }
  }
}

void write_summary_csv(const PathBundle& b, const std::string& path) {
  CsvWriter w(path, {"t", "component", "mean", "sd", "min", "max"});
  for (std::size_t k = 0; k < b.times.size(); ++k) {
    for (int c = -1; c < b.n; ++c) {
      double sum = 0.0, sq = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < b.n_paths; ++i) {
        if (b.aborted[i]) continue;
        const double v = c < 0 ? b.X(i, k) : b.Y(i, k)[c];
        sum += v;
        sq += v * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++cnt;
      }
      const double mean = cnt ? sum / static_cast<double>(cnt) : 0.0;
      const double var = cnt > 1 ? std::max(0.0, (sq - cnt * mean * mean) / static_cast<double>(cnt - 1)) : 0.0;
      w.row({fmt(b.times[k]), c < 0 ? "x" : "y" + std::to_string(c + 1), fmt(mean), fmt(std::sqrt(var)), fmt(lo), fmt(hi)});
    }
  }
}

}  // namespace modaff
