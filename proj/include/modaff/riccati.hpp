#pragma once

// Generalized Riccati system  d/dt psi = R(psi) + lambda,  psi(0) = u.
// Only the I-block is integrated numerically; the J-block is linear and is
// evaluated in closed form, psi_J(t) = e^{B t} u_J + int_0^t e^{B s} ds lambda_J
// with B = (beta^T)_JJ.

#include "modaff/ode.hpp"
#include "modaff/params.hpp"

namespace modaff {

/// Affine discount rate L(y) = l + <lambda, y>.
struct DiscountSpec {
  double l = 0.0;
  Vec lambda;

  static DiscountSpec none(int n) { return {0.0, Vec::Zero(n)}; }
  bool is_zero() const { return l == 0.0 && (lambda.size() == 0 || lambda.isZero(0.0)); }
};

struct RiccatiOptions {
  Tolerance tol;
  double ceiling = 1e8;
  /// Upper bound on the step as a fraction of the horizon; keeps the cubic
  /// Hermite dense output well below the solver tolerance.
  double max_step_fraction = 1.0 / 256;
};

class RiccatiPath {
 public:
  RiccatiPath() = default;

  const ComplexDomainPoint& u0() const { return u0_; }
  const DiscountSpec& discount() const { return discount_; }
  double horizon() const { return horizon_; }
  int n() const { return shape_.n; }

  /// psi(t) for 0 <= t <= horizon (cubic Hermite on the I-block, exact J-block).
  CVec value(double t) const;
  /// psi at the accepted step times.
  std::vector<double> times() const;
  std::vector<CVec> values() const;
  std::size_t rejected_steps() const { return rejected_; }

 private:
  friend RiccatiPath solve_riccati_extended(const XAdmissibleParams&, const ComplexDomainPoint&,
                                            const DiscountSpec&, double, const RiccatiOptions&);
  CVec j_block(double t) const;

  ComplexDomainPoint u0_;
  DiscountSpec discount_;
  StateSpaceShape shape_;
  double horizon_ = 0.0;
  Mat j_generator_;              // (d+1) x (d+1) augmented [[B, lambda_J], [0, 0]]
  std::vector<OdeStep> steps_;   // realified I-block
  std::size_t rejected_ = 0;
};

RiccatiPath solve_riccati_extended(const XAdmissibleParams& p, const ComplexDomainPoint& u0, const DiscountSpec& d,
                                   double T, const RiccatiOptions& opt = {});

inline RiccatiPath solve_riccati(const XAdmissibleParams& p, const ComplexDomainPoint& u0, double T,
                                 const RiccatiOptions& opt = {}) {
  return solve_riccati_extended(p, u0, DiscountSpec::none(p.shape.n), T, opt);
}

/// R(u) + lambda.
CVec eval_R_extended(const XAdmissibleParams& p, const CVec& u, const DiscountSpec& d);

}  // namespace modaff
