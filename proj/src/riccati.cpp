#include "modaff/riccati.hpp"

#include <unsupported/Eigen/MatrixFunctions>

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

}  // namespace

CVec eval_R_extended(const XAdmissibleParams& p, const CVec& u, const DiscountSpec& d) {
  CVec r = eval_R(p, u);
  if (d.lambda.size() > 0) r += d.lambda.cast<Complex>();
  return r;
}

CVec RiccatiPath::j_block(double t) const {
  const int dj = shape_.dim_J();
  if (dj == 0) return CVec(0);
  const Mat E = (j_generator_ * t).exp();
  const CVec uj = u0_.value().tail(dj);
  CVec out = E.topLeftCorner(dj, dj).cast<Complex>() * uj;
  out += E.topRightCorner(dj, 1).col(0).cast<Complex>();
  return out;
}

CVec RiccatiPath::value(double t) const {
  if (t < 0.0 || t > horizon_ * (1.0 + 1e-12) + 1e-15) {
    throw StructuralError("Riccati path evaluated at t=" + std::to_string(t) + " outside [0, " +
                          std::to_string(horizon_) + "]");
  }
  CVec out(shape_.n);
  if (shape_.m > 0) out.head(shape_.m) = complexify(dense_eval(steps_, t));
  if (shape_.dim_J() > 0) out.tail(shape_.dim_J()) = t == 0.0 ? CVec(u0_.star()) : j_block(t);
  return out;
}

std::vector<double> RiccatiPath::times() const {
  std::vector<double> out;
  for (const auto& s : steps_) out.push_back(s.t);
  return out;
}

std::vector<CVec> RiccatiPath::values() const {
  std::vector<CVec> out;
  for (const auto& s : steps_) out.push_back(value(s.t));
  return out;
}

RiccatiPath solve_riccati_extended(const XAdmissibleParams& p, const ComplexDomainPoint& u0, const DiscountSpec& d,
                                   double T, const RiccatiOptions& opt) {
  const StateSpaceShape& s = p.shape;
  if (u0.shape().n != s.n || u0.shape().m != s.m) throw StructuralError("Riccati start point has the wrong shape");
  if (!(T >= 0.0)) throw StructuralError("Riccati horizon must be nonnegative");
  if (d.lambda.size() != 0 && d.lambda.size() != s.n) throw StructuralError("discount lambda has the wrong length");

  RiccatiPath path;
  path.u0_ = u0;
  path.discount_ = d;
  if (path.discount_.lambda.size() == 0) path.discount_.lambda = Vec::Zero(s.n);
  path.shape_ = s;
  path.horizon_ = T;
  const int dj = s.dim_J();
  path.j_generator_ = Mat::Zero(dj + 1, dj + 1);
  if (dj > 0) {
    path.j_generator_.topLeftCorner(dj, dj) = beta_star(p);
    path.j_generator_.topRightCorner(dj, 1) = path.discount_.lambda.tail(dj);
  }

  if (s.m == 0) {
    // Nothing to integrate; store a uniform node grid for consumers.
    const int nodes = 65;
    for (int k = 0; k < nodes; ++k) {
      const double t = T * k / (nodes - 1);
      path.steps_.push_back({t, Vec(0), Vec(0)});
      if (T == 0.0) break;
    }
    const CVec end = path.value(T);
    if (end.cwiseAbs().maxCoeff() > opt.ceiling) {
      throw FiniteLifetimeError(0.0, T, "linear Riccati block exceeds the ceiling before the horizon");
    }
    return path;
  }

  const int m = s.m;
  CVec u_full = u0.value();
  auto rhs = [&](double t, const Vec& y, Vec& dy) {
    CVec psi(s.n);
    psi.head(m) = complexify(y);
    if (dj > 0) psi.tail(dj) = t == 0.0 ? CVec(u0.star()) : path.j_block(t);
    const CVec r = eval_R_extended(p, psi, path.discount_);
    dy = realify(r.head(m));
  };

  OdeOptions o;
  o.tol = opt.tol;
  o.ceiling = opt.ceiling;
  if (opt.max_step_fraction > 0.0 && T > 0.0) o.h_max = T * opt.max_step_fraction;
  OdeResult res = dopri5(rhs, 0.0, realify(u_full.head(m)), T, o);
  path.steps_ = std::move(res.steps);
  path.rejected_ = res.rejected;
  if (res.hit_ceiling) {
    std::ostringstream os;
    os << "Riccati solution leaves every bounded set in (" << path.steps_.back().t << ", " << res.t_exceed
       << "] before the horizon " << T;
    throw FiniteLifetimeError(path.steps_.back().t, res.t_exceed, os.str());
  }
  if (dj > 0 && path.j_block(T).cwiseAbs().maxCoeff() > opt.ceiling) {
    throw FiniteLifetimeError(0.0, T, "linear Riccati block exceeds the ceiling before the horizon");
  }
  return path;
}

}  // namespace modaff
