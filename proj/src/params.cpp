#include "modaff/params.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <sstream>

namespace modaff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string entry(const std::string& name, int r, int c, double v) {
  std::ostringstream os;
  os << name << "(" << r + 1 << "," << c + 1 << ") = " << v;
  return os.str();
}

std::string entry(const std::string& name, int r, double v) {
  std::ostringstream os;
  os << name << "(" << r + 1 << ") = " << v;
  return os.str();
}

bool is_symmetric(const Mat& a) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

IndexMask mask_I(const StateSpaceShape& s) {
  IndexMask m(s.n, false);
  for (int k = 0; k < s.m; ++k) m[k] = true;
  return m;
}

}  // namespace

bool is_psd(const Mat& a) {
  if (a.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() >= -1e-10 * norm;
}

XAdmissibleParams XAdmissibleParams::zero(StateSpaceShape shape) {
  XAdmissibleParams p;
  p.shape = shape;
  p.a = MatrixField::constant(Mat::Zero(shape.n, shape.n));
  p.alpha.assign(shape.m, Mat::Zero(shape.n, shape.n));
  p.b = VectorField::constant(Vec::Zero(shape.n));
  p.beta = Mat::Zero(shape.n, shape.n);
  p.c = ScalarField::constant(0.0);
  p.gamma = Vec::Zero(shape.m);
  p.mu.assign(shape.m, JumpMeasure::none());
  return p;
}

bool XAdmissibleParams::conservative(const std::vector<double>& probe_states) const {
  if (gamma.size() > 0 && gamma.cwiseAbs().maxCoeff() != 0.0) return false;
  for (double x : probe_states) {
    if (c(x) != 0.0) return false;
  }
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) {
    os << v.bullet;
    if (!std::isnan(v.x)) os << " at x=" << v.x;
    os << ": " << v.detail << "\n";
  }
  return os.str();
}

IndexMask mask_J(const StateSpaceShape& s) {
  IndexMask m(s.n, false);
  for (int k = s.m; k < s.n; ++k) m[k] = true;
  return m;
}

IndexMask mask_J_plus(const StateSpaceShape& s, int i) {
  IndexMask m = mask_J(s);
  m[i] = true;
  return m;
}

void check_dimensions(const XAdmissibleParams& p, const StateSpaceShape& s) {
  auto bad = [](const std::string& what) { throw StructuralError("dimension mismatch: " + what); };
  if (p.shape.m != s.m || p.shape.n != s.n) bad("parameter shape differs from requested shape");
  const int n = s.n;
  const Mat& a0 = p.a.sample();
  if (a0.rows() != n || a0.cols() != n) bad("a is not n x n");
  if (static_cast<int>(p.alpha.size()) != s.m) bad("expected m alpha matrices");
  for (const auto& al : p.alpha) {
    if (al.rows() != n || al.cols() != n) bad("alpha_i is not n x n");
  }
  if (p.b.sample().size() != n) bad("b has wrong length");
  if (p.b.kind() == VectorField::Kind::affine && p.b.slope().size() != n) bad("b slope has wrong length");
  if (p.beta.rows() != n || p.beta.cols() != n) bad("beta is not n x n");
  if (p.gamma.size() != s.m) bad("gamma has wrong length");
  if (static_cast<int>(p.mu.size()) != s.m) bad("expected m linear jump measures");
  auto check_measure = [&](const JumpMeasure& nu, const std::string& name) {
    for (const auto& part : nu.parts) {
      if (const auto* f = std::get_if<FiniteActivityKernel>(&part)) {
        if (f->direction.size() != n) bad(name + " jump direction has wrong length");
      } else if (const auto* c = std::get_if<CgmyKernel>(&part)) {
        for (const auto& comp : c->components) {
          if (comp.index < 0 || comp.index >= n) bad(name + " CGMY index out of range");
        }
      } else if (const auto* d = std::get_if<DiracKernel>(&part)) {
        for (const auto& atom : d->atoms) {
          if (atom.location.sample().size() != n) bad(name + " Dirac location has wrong length");
        }
      }
    }
  };
  check_measure(p.m_kernel, "m");
  for (int i = 0; i < s.m; ++i) check_measure(p.mu[i], "mu_" + std::to_string(i + 1));
}

ValidationReport validate_params(const XAdmissibleParams& p, const StateSpaceShape& s,
                                 const std::vector<double>& probe_states) {
  if (probe_states.empty()) throw StructuralError("validate_params needs at least one probe state");
  check_dimensions(p, s);
  ValidationReport rep;
  auto add = [&](const std::string& bullet, double x, const std::string& detail) {
    rep.violations.push_back({bullet, x, detail});
  };
  const IndexMask I = mask_I(s);
  const IndexMask J = mask_J(s);

  // x-free conditions
  for (int i = 0; i < s.m; ++i) {
    const Mat& al = p.alpha[i];
    if (!al.allFinite()) add("alpha_finite", kNaN, "alpha_" + std::to_string(i + 1) + " has non-finite entries");
    if (!is_symmetric(al)) add("alpha_sym", kNaN, "alpha_" + std::to_string(i + 1) + " is not symmetric");
    if (!is_psd(al)) add("alpha_psd", kNaN, "alpha_" + std::to_string(i + 1) + " is not positive semidefinite");
    for (int k = 0; k < s.m; ++k) {
      for (int l = 0; l < s.m; ++l) {
        if (k == i || l == i) continue;
        if (al(k, l) != 0.0) add("alpha_I(i)I(i)", kNaN, entry("alpha_" + std::to_string(i + 1), k, l, al(k, l)));
      }
    }
  }
  if (!p.beta.allFinite()) add("beta_finite", kNaN, "beta has non-finite entries");
  for (int i = 0; i < s.m; ++i) {
    for (int j = s.m; j < s.n; ++j) {
      if (p.beta(i, j) != 0.0) add("beta_IJ", kNaN, entry("beta", i, j, p.beta(i, j)));
    }
    for (int k = 0; k < s.m; ++k) {
      if (k != i && p.beta(i, k) < 0.0) add("beta_iI(i)", kNaN, entry("beta", i, k, p.beta(i, k)));
    }
  }
  for (int i = 0; i < s.m; ++i) {
    if (!(p.gamma[i] >= 0.0)) add("gamma", kNaN, entry("gamma", i, p.gamma[i]));
  }
  for (int i = 0; i < s.m; ++i) {
    // mu_i is constant in x; the probe state is irrelevant.
    const MassCheck mc = admissibility_mass(p.mu[i], 0.0, [&] {
      IndexMask lin = I;
      lin[i] = false;
      return lin;
    }(), mask_J_plus(s, i), I);
    if (!mc.support_ok) add("mu_support", kNaN, "mu_" + std::to_string(i + 1) + ": " + mc.detail);
    if (!std::isfinite(mc.mass)) add("mu_mass", kNaN, "mu_" + std::to_string(i + 1) + " has infinite truncated mass");
  }

  for (double x : probe_states) {
    const Mat a = p.a(x);
    if (!a.allFinite()) add("a_finite", x, "a(x) has non-finite entries");
    if (!is_symmetric(a)) add("a_sym", x, "a(x) is not symmetric");
    if (!is_psd(a)) add("a_psd", x, "a(x) is not positive semidefinite");
    for (int k = 0; k < s.m; ++k) {
      for (int l = 0; l < s.m; ++l) {
        if (a(k, l) != 0.0) add("a_II", x, entry("a", k, l, a(k, l)));
      }
    }
    const Vec b = p.b(x);
    if (!b.allFinite()) add("b_finite", x, "b(x) has non-finite entries");
    for (int k = 0; k < s.m; ++k) {
      if (!(b[k] >= 0.0)) add("b_I", x, entry("b", k, b[k]));
    }
    const double c = p.c(x);
    if (!(c >= 0.0) || !std::isfinite(c)) add("c", x, "c(x) = " + std::to_string(c));
    const MassCheck mc = admissibility_mass(p.m_kernel, x, I, J, I);
    if (!mc.support_ok) add("m_support", x, mc.detail);
    if (!std::isfinite(mc.mass)) add("m_mass", x, "truncated mass of m(x, .) is infinite");
  }
  return rep;
}

Complex eval_F(const XAdmissibleParams& p, double x, const CVec& u) {
  const Vec b = p.b(x);
  Complex out = (b.cast<Complex>().transpose() * u)(0) + bilinear(p.a(x), u, u) - p.c(x);
  if (!p.m_kernel.empty()) out += compensated_integral(p.m_kernel, x, u, mask_J(p.shape));
  return out;
}

CVec eval_R(const XAdmissibleParams& p, const CVec& u) {
  const auto& s = p.shape;
  CVec out = p.beta.transpose().cast<Complex>() * u;
  for (int i = 0; i < s.m; ++i) {
    out[i] += bilinear(p.alpha[i], u, u) - p.gamma[i];
    if (!p.mu[i].empty()) out[i] += compensated_integral(p.mu[i], 0.0, u, mask_J_plus(s, i));
  }
  return out;
}

Mat beta_star(const XAdmissibleParams& p) {
  const int m = p.shape.m;
  const int d = p.shape.dim_J();
  return p.beta.transpose().block(m, m, d, d);
}

}  // namespace modaff
