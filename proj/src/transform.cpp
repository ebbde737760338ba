#include "modaff/transform.hpp"

#include "modaff/csv.hpp"
#include "modaff/parallel.hpp"

#include <sstream>

namespace modaff {

namespace {

DiscountSpec resolve_discount(const XAdmissibleParams& p, const TransformQuery& q) {
  if (!q.discount) return DiscountSpec::none(p.shape.n);
  DiscountSpec d = *q.discount;
  if (d.lambda.size() == 0) d.lambda = Vec::Zero(p.shape.n);
  return d;
}

std::vector<double> cache_key(const CVec& u, const DiscountSpec& d) {
  std::vector<double> key;
  for (int i = 0; i < u.size(); ++i) {
    key.push_back(u[i].real());
    key.push_back(u[i].imag());
  }
  key.push_back(d.l);
  for (int i = 0; i < d.lambda.size(); ++i) key.push_back(d.lambda[i]);
  return key;
}

void check_query(const XAdmissibleParams& p, const TransformQuery& q) {
  if (q.u.size() != p.shape.n) throw StructuralError("transform exponent has the wrong dimension");
  if (q.y.size() != p.shape.n) throw StructuralError("initial state y has the wrong dimension");
  if (!(q.T >= 0.0)) throw StructuralError("transform horizon must be nonnegative");
  for (int i = 0; i < p.shape.m; ++i) {
    if (q.y[i] < 0.0) throw StructuralError("initial state y has a negative nonnegative-cone component");
  }
}

}  // namespace

std::shared_ptr<const RiccatiPath> RiccatiCache::get(const XAdmissibleParams& p, const CVec& u, const DiscountSpec& d,
                                                     double T, const RiccatiOptions& opt) {
  const auto key = cache_key(u, d);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = paths_.find(key);
    if (it != paths_.end() && it->second->horizon() >= T) {
      ++hits_;
      return it->second;
    }
  }
  auto path = std::make_shared<const RiccatiPath>(solve_riccati_extended(p, ComplexDomainPoint(u, p.shape), d, T, opt));
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = paths_[key];
  if (!slot || slot->horizon() < path->horizon()) slot = path;
  return path;
}

std::size_t RiccatiCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return paths_.size();
}

TransformResult transform_with_path(const XAdmissibleParams& p, const Modulator& mod,
                                    std::shared_ptr<const RiccatiPath> rp, const TransformQuery& q,
                                    const TransformNumerics& num) {
  TransformResult res;
  res.psi = rp->value(q.T);
  CauchySolution sol;
  if (const auto* chain = std::get_if<FiniteChainModulator>(&mod)) {
    ChainCauchyOptions opt = num.chain;
    opt.q = q.q;
    sol = solve_cauchy_chain(p, *chain, rp, q.T, opt);
  } else if (num.feynman_kac) {
    FeynmanKacOptions opt = num.fk;
    opt.q = q.q;
    opt.start_states = {q.x};
    opt.times = {q.T};
    sol = solve_cauchy_feynman_kac(p, mod, rp, q.T, opt);
  } else {
    const auto& diff = std::get<Diffusion1DModulator>(mod);
    PdeCauchyOptions opt = num.pde;
    opt.q = q.q;
    PdeGrid grid = num.pde_grid;
    if (!diff.bounded()) grid.center = q.x;
    sol = solve_cauchy_pde(p, diff, rp, q.T, grid, opt);
  }
  res.phi = sol.at_end(q.x);
  const Complex expo = std::exp(res.psi.cwiseProduct(q.y.cast<Complex>()).sum());
  res.value = res.phi * expo;
  res.method = to_string(sol.method);
  const double err_phi = sol.method == CauchyMethod::feynman_kac ? sol.stderr_at_end(q.x) : sol.error_estimate;
  res.error_estimate = err_phi * std::abs(expo);
  res.metadata = sol.metadata;
  res.warnings = sol.warnings;
  res.metadata["riccati_steps"] = static_cast<double>(rp->times().size());
  return res;
}

TransformResult transform(const XAdmissibleParams& p, const Modulator& mod, const TransformQuery& q,
                          const TransformNumerics& num, RiccatiCache* cache) {
  check_query(p, q);
  const DiscountSpec d = resolve_discount(p, q);
  std::shared_ptr<const RiccatiPath> rp;
  if (cache) {
    rp = cache->get(p, q.u, d, q.T, num.riccati);
  } else {
    rp = std::make_shared<const RiccatiPath>(solve_riccati_extended(p, ComplexDomainPoint(q.u, p.shape), d, q.T, num.riccati));
  }
  return transform_with_path(p, mod, rp, q, num);
}

TransformResult exp_moment(const XAdmissibleParams& p, const Modulator& mod, const Vec& u, const TransformQuery& q,
                           const TransformNumerics& num) {
  TransformQuery query = q;
  query.u = u.cast<Complex>();
  query.q = 0.0;
  check_query(p, query);
  const auto states = probe_states(mod, 16);
  for (double x : states) {
    if (p.c(x) != 0.0) {
      throw RefusalError("exponential moments need c = 0 (killing rate is " + std::to_string(p.c(x)) +
                         " at x = " + std::to_string(x) + ")");
    }
  }
  if (p.gamma.size() && !p.gamma.isZero(0.0)) throw RefusalError("exponential moments need gamma = 0");

  const DiscountSpec d = resolve_discount(p, query);
  // Blow-up of the real Riccati solution surfaces as FiniteLifetimeError.
  auto rp = std::make_shared<const RiccatiPath>(
      solve_riccati_extended(p, ComplexDomainPoint(query.u, p.shape), d, query.T, num.riccati));

  const int probes = 16;
  for (int k = 0; k < probes; ++k) {
    const double t = query.T * k / (probes - 1);
    const Vec v = rp->value(t).real();
    for (double x : states) {
      if (!exponential_tail_finite(p.m_kernel, x, v)) {
        std::ostringstream os;
        os << "moment condition on m fails: int_{|z|>1} e^{<psi(t,u),z>} m(x,dz) diverges at t = " << t
           << ", x = " << x;
        throw MomentConditionError(os.str());
      }
    }
    for (int l = 0; l < p.shape.m; ++l) {
      for (int kk = 0; kk < p.shape.m; ++kk) {
        if (!exponential_tail_finite(p.mu[l], states.front(), v, 1, kk)) {
          std::ostringstream os;
          os << "moment condition on mu_" << l + 1 << " fails: int_{z_" << kk + 1
             << " > 1} z_k e^{<psi(t,u),z>} mu(dz) diverges at t = " << t;
          throw MomentConditionError(os.str());
        }
      }
    }
  }
  TransformResult res = transform_with_path(p, mod, rp, query, num);
  res.metadata["moment_probes"] = probes * static_cast<double>(states.size());
  return res;
}

std::vector<TransformResult> transform_batch(const XAdmissibleParams& p, const Modulator& mod,
                                             const std::vector<CVec>& us, const TransformQuery& base,
                                             const TransformNumerics& num, int threads) {
  RiccatiCache cache;
  std::vector<TransformResult> out(us.size());
  parallel_for(us.size(), threads, [&](std::size_t i) {
    TransformQuery q = base;
    q.u = us[i];
    out[i] = transform(p, mod, q, num, &cache);
  });
  return out;
}

void write_transform_csv(const std::vector<CVec>& us, const std::vector<TransformResult>& results,
                         const std::string& path) {
  if (us.size() != results.size()) throw StructuralError("transform table size mismatch");
  const int n = us.empty() ? 0 : static_cast<int>(us.front().size());
  std::vector<std::string> header;
  for (int i = 0; i < n; ++i) header.push_back("re_u" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) header.push_back("im_u" + std::to_string(i + 1));
  for (const char* c : {"re", "im", "err"}) header.emplace_back(c);
  CsvWriter w(path, header);
  for (std::size_t k = 0; k < us.size(); ++k) {
    std::vector<std::string> row;
    for (int i = 0; i < n; ++i) row.push_back(fmt(us[k][i].real()));
    for (int i = 0; i < n; ++i) row.push_back(fmt(us[k][i].imag()));
    row.push_back(fmt(results[k].value.real()));
    row.push_back(fmt(results[k].value.imag()));
    row.push_back(fmt(results[k].error_estimate));
    w.row(row);
  }
}

}  // namespace modaff
