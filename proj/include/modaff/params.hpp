#pragma once

// x-admissible parameter sets and the functions F(x,u), R(u).
//
// Generator convention: for f(y) = e^<u,y>
//   A f / f = F(x,u) + <R(u), y>
//   F(x,u) = <b(x),u> + u^T a(x) u - c(x) + int (e^<u,z> - 1 - <u_J, chi_J(z)>) m(x,dz)
//   R_i(u) = u^T alpha_i u + (beta^T u)_i - gamma_i
//            + int (e^<u,z> - 1 - <u_J(i), chi_J(i)(z)>) mu_i(dz)          i in I
//   R_J(u) = (beta^T)_JJ u_J
// so the covariance rate of Y is 2(a(x) + sum_i alpha_i y_i) and the drift is
// b(x) + beta y.

#include "modaff/core.hpp"
#include "modaff/jump_measure.hpp"

namespace modaff {

struct XAdmissibleParams {
  StateSpaceShape shape;
  MatrixField a;                  // n x n
  std::vector<Mat> alpha;         // m matrices, n x n
  VectorField b;                  // n
  Mat beta;                       // n x n
  ScalarField c;
  Vec gamma;                      // m
  JumpMeasure m_kernel;
  std::vector<JumpMeasure> mu;    // m measures

  /// Zero parameters of the given shape.
  static XAdmissibleParams zero(StateSpaceShape shape);

  /// True when c == 0 and gamma == 0 (conservative, no killing).
  bool conservative(const std::vector<double>& probe_states) const;
};

struct Violation {
  std::string bullet;   // short id, e.g. "beta_IJ"
  double x = 0.0;       // offending modulator state (NaN for x-free bullets)
  std::string detail;   // entry and value
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// A parameter set failed one or more admissibility checks.
class AdmissibilityError : public Error {
 public:
  explicit AdmissibilityError(ValidationReport report)
      : Error("parameters are not admissible:\n" + report.summary()), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Throws StructuralError on dimension mismatches between p and shape.
void check_dimensions(const XAdmissibleParams& p, const StateSpaceShape& shape);

/// Checks every admissibility condition at every probe state. Throws
/// StructuralError on dimension mismatches or an empty probe list.
ValidationReport validate_params(const XAdmissibleParams& p, const StateSpaceShape& shape,
                                 const std::vector<double>& probe_states);

/// Component masks for the jump integrals.
IndexMask mask_J(const StateSpaceShape& shape);
IndexMask mask_J_plus(const StateSpaceShape& shape, int i);

Complex eval_F(const XAdmissibleParams& p, double x, const CVec& u);
inline Complex eval_F(const XAdmissibleParams& p, double x, const ComplexDomainPoint& u) {
  return eval_F(p, x, u.value());
}

CVec eval_R(const XAdmissibleParams& p, const CVec& u);
inline CVec eval_R(const XAdmissibleParams& p, const ComplexDomainPoint& u) { return eval_R(p, u.value()); }

/// (beta^T)_JJ
Mat beta_star(const XAdmissibleParams& p);

/// PSD test with eigenvalue floor -1e-10 * ||A||.
bool is_psd(const Mat& a);

}  // namespace modaff
