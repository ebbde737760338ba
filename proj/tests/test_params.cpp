#include "doctest.h"
#include "oracles.hpp"

#include "modaff/models.hpp"

#include <random>

using namespace modaff;

namespace {

CVec cv(std::initializer_list<Complex> v) {
  CVec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (auto z : v) out[i++] = z;
  return out;
}

XAdmissibleParams cgmy_params(double C, double G, double M, double Y) {
  auto p = XAdmissibleParams::zero(StateSpaceShape(0, 1));
  CgmyComponent c;
  c.index = 0;
  c.C = C;
  c.G = ScalarField::constant(G);
  c.M = ScalarField::constant(M);
  c.Y = Y;
  p.m_kernel.parts.push_back(CgmyKernel{{c}});
  return p;
}

bool has_bullet(const ValidationReport& r, const std::string& bullet) {
  for (const auto& v : r.violations) {
    if (v.bullet == bullet) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("state space shape rejects impossible dimensions") {
  CHECK_THROWS_AS(StateSpaceShape(2, 1), StructuralError);
  CHECK_THROWS_AS(StateSpaceShape(0, 0), StructuralError);
  StateSpaceShape s(1, 3);
  CHECK(s.in_I(0));
  CHECK(s.in_J(1));
  CHECK(s.dim_J() == 2);
}

TEST_CASE("truncation is the identity on the unit cube and maps into it") {
  CHECK(truncate(0.3) == 0.3);
  CHECK(truncate(-1.0) == -1.0);
  CHECK(truncate(7.0) == 1.0);
  CHECK(truncate(-7.0) == -1.0);
}

TEST_CASE("domain membership of complex points") {
  StateSpaceShape s(1, 2);
  CHECK(ComplexDomainPoint(cv({{-0.5, 1.0}, {0.0, 3.0}}), s).in_U());
  CHECK_FALSE(ComplexDomainPoint(cv({{0.5, 1.0}, {0.0, 3.0}}), s).in_U());
  CHECK_FALSE(ComplexDomainPoint(cv({{-0.5, 1.0}, {0.1, 3.0}}), s).in_U());
  CHECK_THROWS_AS(ComplexDomainPoint(cv({0.0}), s), StructuralError);
}

TEST_CASE("jacobi-heston-credit parameters validate at probe states") {
  const auto model = make_jacobi_heston_credit();
  const auto rep = validate_params(model.params, StateSpaceShape(3, 4), {0.0, 0.5, 1.0});
  CHECK_MESSAGE(rep.ok(), rep.summary());
}

TEST_CASE("zero parameters are admissible for any shape") {
  for (auto [m, n] : {std::pair{0, 1}, std::pair{1, 1}, std::pair{2, 3}, std::pair{3, 4}}) {
    const auto p = XAdmissibleParams::zero(StateSpaceShape(m, n));
    CHECK(validate_params(p, p.shape, {0.0}).ok());
  }
}

TEST_CASE("beta_IJ violation is reported") {
  auto model = make_jacobi_heston_credit();
  model.params.beta(0, 3) = 1.0;
  const auto rep = validate_params(model.params, StateSpaceShape(3, 4), {0.0, 0.5, 1.0});
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].bullet == "beta_IJ");
  CHECK(rep.violations[0].detail.find("beta(1,4)") != std::string::npos);
}

TEST_CASE("dimension mismatch is structural, not an admissibility finding") {
  auto p = XAdmissibleParams::zero(StateSpaceShape(1, 2));
  CHECK_THROWS_AS(validate_params(p, StateSpaceShape(1, 3), {0.0}), StructuralError);
  p.beta = Mat::Zero(3, 3);
  CHECK_THROWS_AS(validate_params(p, StateSpaceShape(1, 2), {0.0}), StructuralError);
  CHECK_THROWS_AS(validate_params(XAdmissibleParams::zero(StateSpaceShape(1, 2)), StateSpaceShape(1, 2), {}),
                  StructuralError);
}

TEST_CASE("single-bullet perturbations are each detected") {
  const auto base = make_jacobi_heston_credit();
  const std::vector<double> probes{0.0, 0.5, 1.0};
  REQUIRE(validate_params(base.params, base.params.shape, probes).ok());
  struct Case {
    std::string bullet;
    std::function<void(XAdmissibleParams&)> perturb;
  };
  const std::vector<Case> cases = {
      {"a_II", [](auto& p) { Mat a = Mat::Zero(4, 4); a(0, 0) = 0.1; p.a = MatrixField::constant(a); }},
      {"a_psd", [](auto& p) { Mat a = Mat::Zero(4, 4); a(3, 3) = -0.1; p.a = MatrixField::constant(a); }},
      {"a_sym", [](auto& p) { Mat a = Mat::Zero(4, 4); a(2, 3) = 0.1; p.a = MatrixField::constant(a); }},
      {"alpha_I(i)I(i)", [](auto& p) { p.alpha[0](1, 1) = 0.1; }},
      {"alpha_psd", [](auto& p) { p.alpha[2](3, 3) = 0.01; }},
      {"b_I", [](auto& p) { p.b = VectorField::constant((Vec(4) << -0.01, 0.0, 0.0, 0.0).finished()); }},
      {"beta_IJ", [](auto& p) { p.beta(1, 3) = 0.5; }},
      {"beta_iI(i)", [](auto& p) { p.beta(0, 1) = -0.5; }},
      {"c", [](auto& p) { p.c = ScalarField::constant(-0.1); }},
      {"gamma", [](auto& p) { p.gamma[1] = -0.1; }},
      {"m_support", [](auto& p) { p.m_kernel = JumpMeasure::dirac((Vec(4) << -0.5, 0, 0, 0).finished()); }},
      {"mu_support", [](auto& p) { p.mu[0] = JumpMeasure::dirac((Vec(4) << 0, -0.5, 0, 0).finished()); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.bullet);
    auto p = base.params;
    c.perturb(p);
    const auto rep = validate_params(p, p.shape, probes);
    CHECK(has_bullet(rep, c.bullet));
  }
}

TEST_CASE("F at u = 0 is -c(x)") {
  auto p = make_jacobi_heston_credit().params;
  p.c = ScalarField::affine(0.1, 0.2);
  CHECK(std::abs(eval_F(p, 0.5, CVec::Zero(4)) - Complex(-0.2)) < 1e-15);
}

TEST_CASE("R at u = 0 is (-gamma, 0)") {
  auto p = make_jacobi_heston_credit().params;
  p.gamma = Vec::Constant(3, 0.25);
  const CVec r = eval_R(p, CVec::Zero(4));
  CHECK(std::abs(r[0] + 0.25) < 1e-15);
  CHECK(std::abs(r[2] + 0.25) < 1e-15);
  CHECK(std::abs(r[3]) == 0.0);
}

TEST_CASE("R_1 on the short-rate axis is the CIR Riccati right-hand side") {
  const auto model = make_jacobi_heston_credit();
  const double ar = model.settings.at("alpha_r"), br = model.settings.at("beta_r");
  for (Complex u1 : {Complex(-0.3, 0.0), Complex(-0.1, 2.0), Complex(0.0, -5.0)}) {
    const CVec r = eval_R(model.params, cv({u1, 0.0, 0.0, 0.0}));
    CHECK(std::abs(r[0] - (ar * u1 * u1 + br * u1)) < 1e-14);
    // The log price picks up the short rate through beta(4,1) = 1 only via u_4.
    CHECK(std::abs(r[3]) == 0.0);
  }
}

TEST_CASE("m = 0 reduces R to the linear J-block") {
  auto p = XAdmissibleParams::zero(StateSpaceShape(0, 2));
  p.beta << -1.0, 0.5, 0.2, -2.0;
  const CVec u = cv({{0.0, 1.0}, {0.0, -3.0}});
  const CVec r = eval_R(p, u);
  const CVec expect = beta_star(p).cast<Complex>() * u;
  CHECK((r - expect).norm() < 1e-15);
}

TEST_CASE("perturbed heat example: F on both sides of zero") {
  const auto model = make_perturbed_heat();
  const CVec u = cv({{0.0, 1.0}});
  CHECK(std::abs(eval_F(model.params, 1.0, u) - Complex(-0.5)) < 1e-15);
  CHECK(std::abs(eval_F(model.params, -1e-6, u) - Complex(-0.5)) < 1e-4);
  // For x < 0, F = (e^{ux} - 1 - u x)/x^2.
  const double x = -0.7;
  const Complex expect = (std::exp(Complex(0, 1) * x) - 1.0 - Complex(0, 1) * x) / (x * x);
  CHECK(std::abs(eval_F(model.params, x, u) - expect) < 1e-14);
}

TEST_CASE("CGMY closed form matches brute-force quadrature") {
  for (double Y : {-0.5, 0.0, 0.5, 1.0, 1.5}) {
    for (Complex w : {Complex(0, 1), Complex(0, -7.5), Complex(-2.0, 3.0), Complex(1.5, 0.0)}) {
      CAPTURE(Y);
      CAPTURE(w);
      const auto p = cgmy_params(1.0, 5.0, 10.0, Y);
      const Complex got = eval_F(p, 0.0, cv({w}));
      const Complex ref = oracle::cgmy_quadrature(w, 1.0, 5.0, 10.0, Y);
      CHECK(std::abs(got - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("CGMY exponential moment outside the strip is refused") {
  const auto p = cgmy_params(1.0, 5.0, 10.0, 0.5);
  CHECK_THROWS_AS(eval_F(p, 0.0, cv({10.5})), MomentConditionError);
  CHECK_THROWS_AS(eval_F(p, 0.0, cv({-5.5})), MomentConditionError);
  CHECK_NOTHROW(eval_F(p, 0.0, cv({9.5})));
}

TEST_CASE("finite-activity exponential jumps refuse moments beyond the decay rate") {
  auto p = XAdmissibleParams::zero(StateSpaceShape(0, 1));
  p.m_kernel.parts.push_back(FiniteActivityKernel{ScalarField::constant(2.0), Vec::Ones(1), SizeLaw::exponential, 0.0, 0.5});
  CHECK_THROWS_AS(eval_F(p, 0.0, cv({2.5})), MomentConditionError);
  // int (e^{us} - 1 - u chi(s)) 2 * 2 e^{-2 s} ds at u = i, against a closed form.
  const Complex u(0, 1);
  const double lam = 2.0;
  // int_0^inf (e^{us} - 1) lam e^{-lam s} ds = u/(lam - u); chi part: int min(s,1) lam e^{-lam s} = (1 - e^{-lam})/lam
  const Complex ref = 2.0 * (u / (lam - u) - u * (1.0 - std::exp(-lam)) / lam);
  CHECK(std::abs(eval_F(p, 0.0, cv({u})) - ref) < 1e-9);
}

TEST_CASE("F and R are conjugate symmetric on the imaginary axis") {
  const auto model = make_jacobi_heston_credit();
  const auto hawkes = make_mm_hawkes();
  const auto cgmy = make_mm_cgmy();
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int k = 0; k < 20; ++k) {
    CVec u(4);
    for (int i = 0; i < 4; ++i) u[i] = {0.0, nd(gen)};
    CHECK(std::abs(eval_F(model.params, 0.3, u.conjugate()) - std::conj(eval_F(model.params, 0.3, u))) < 1e-13);
    CHECK((eval_R(model.params, u.conjugate()) - eval_R(model.params, u).conjugate()).norm() < 1e-13);
    CVec h = u.head(2);
    CHECK((eval_R(hawkes.params, h.conjugate()) - eval_R(hawkes.params, h).conjugate()).norm() < 1e-13);
    CVec c = u.head(1);
    CHECK(std::abs(eval_F(cgmy.params, 1.0, c.conjugate()) - std::conj(eval_F(cgmy.params, 1.0, c))) < 1e-12);
  }
}

TEST_CASE("built-in models are admissible") {
  for (const auto& name : builtin_model_names()) {
    CAPTURE(name);
    CHECK_NOTHROW(build_model(name));
  }
  CHECK_THROWS_AS(build_model("regime-cir", {{"no_such", 1.0}}), StructuralError);
  CHECK_THROWS_AS(build_model("regime-cir", {{"b_1", -1.0}}), AdmissibilityError);
}

TEST_CASE("mm-cgmy drift makes the discounted price a martingale") {
  const auto m = make_mm_cgmy();
  for (double x : {0.0, 1.0}) {
    CHECK(std::abs(eval_F(m.params, x, cv({1.0})) - Complex(m.settings.at("r"))) < 1e-12);
  }
}
