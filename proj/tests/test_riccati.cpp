#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <random>

using namespace modaff;
using fixture::cv;

TEST_CASE("dopri5 integrates a linear system to tolerance") {
  Mat A(2, 2);
  A << -1.0, 2.0, -2.0, -1.0;
  auto f = [&](double, const Vec& y, Vec& dy) { dy = A * y; };
  OdeOptions o;
  o.tol = {1e-12, 1e-12};
  const auto res = dopri5(f, 0.0, Vec::Ones(2), 3.0, o);
  const Vec exact = oracle::expm(Mat(A * 3.0)) * Vec::Ones(2);
  CHECK((res.steps.back().y - exact).norm() < 1e-10);
  CHECK(res.steps.back().t == 3.0);
}

TEST_CASE("zero start with no killing stays at zero") {
  const auto m = make_jacobi_heston_credit();
  const auto path = solve_riccati(m.params, ComplexDomainPoint(CVec::Zero(4), m.params.shape), 2.0);
  for (double t : {0.0, 0.3, 1.7, 2.0}) CHECK(path.value(t).norm() == 0.0);
}

TEST_CASE("without I-block the solution is the matrix exponential") {
  auto p = XAdmissibleParams::zero(StateSpaceShape(0, 2));
  p.beta << -1.0, 0.3, 0.5, -0.2;
  const CVec u = cv({{0.0, 1.0}, {0.0, -2.0}});
  const auto path = solve_riccati(p, ComplexDomainPoint(u, p.shape), 3.0);
  for (double t : {0.0, 0.5, 3.0}) {
    const CVec expect = oracle::expm(Mat(beta_star(p) * t)).cast<Complex>() * u;
    CHECK((path.value(t) - expect).norm() < 1e-12);
  }
}

TEST_CASE("psi(0) = u exactly and psi_J follows the closed form on the model") {
  const auto m = make_jacobi_heston_credit();
  const CVec u = cv({{-0.2, 1.0}, {0.0, -0.5}, {-0.1, 2.0}, {0.0, 3.0}});
  const auto path = solve_riccati(m.params, ComplexDomainPoint(u, m.params.shape), 1.0);
  CHECK(path.value(0.0) == u);
  for (double t : path.times()) CHECK(std::abs(path.value(t)[3] - u[3]) < 1e-15);
}

TEST_CASE("short-rate block matches the CIR Riccati solution") {
  const auto m = make_jacobi_heston_credit();
  const double a = m.settings.at("alpha_r"), b = m.settings.at("beta_r");
  for (double w : {-0.5, -2.0, -10.0}) {
    const auto path = solve_riccati(m.params, ComplexDomainPoint(cv({w, 0.0, 0.0, 0.0}), m.params.shape), 5.0);
    for (double t : {0.25, 1.0, 2.5, 5.0}) {
      CHECK(std::abs(path.value(t)[0] - oracle::cir_riccati(a, b, w, t)) < 1e-9);
    }
  }
}

TEST_CASE("extended Riccati with lambda = 0 equals the plain one") {
  const auto m = make_jacobi_heston_credit();
  const ComplexDomainPoint u(cv({{-0.1, 0.5}, 0.0, {0.0, 1.0}, {0.0, 2.0}}), m.params.shape);
  const auto a = solve_riccati(m.params, u, 1.0);
  const auto b = solve_riccati_extended(m.params, u, DiscountSpec::none(4), 1.0);
  for (double t : {0.1, 0.77, 1.0}) CHECK(a.value(t) == b.value(t));
}

TEST_CASE("extended Riccati gives the CIR bond exponent") {
  const auto m = make_jacobi_heston_credit();
  Vec lam = Vec::Zero(4);
  lam[0] = -1.0;
  const auto path = solve_riccati_extended(m.params, ComplexDomainPoint(CVec::Zero(4), m.params.shape), {0.0, lam}, 5.0);
  for (double T : {0.5, 1.0, 5.0}) {
    const auto ref = oracle::cir_bond(m.settings.at("alpha_r"), 0.0, m.settings.at("beta_r"), T);
    CHECK(std::abs(path.value(T)[0] - ref.B) < 1e-9);
  }
}

TEST_CASE("variance block matches the Heston Riccati coefficient") {
  const auto m = fixture::pure_heston();
  const auto h = fixture::heston_map(m, 0.5);
  for (double w : {-20.0, -3.0, 0.5, 7.0, 20.0}) {
    const Complex s(0.0, w);
    const auto path = solve_riccati(m.params, ComplexDomainPoint(cv({0.0, 0.0, 0.0, s}), m.params.shape), 1.0);
    for (double t : {0.1, 0.5, 1.0}) {
      CHECK(std::abs(path.value(t)[2] - oracle::heston_D(s, h.kappa, h.xi, h.rho, t)) < 1e-8);
    }
  }
}

TEST_CASE("real exponents beyond the CIR explosion time are reported with a bracket") {
  const auto p = fixture::cir_1d(0.5, 0.1, -0.5);
  const double tstar = oracle::cir_explosion_time(0.5, -0.5, 2.0);
  CHECK(std::abs(tstar - 2.0 * std::log(2.0)) < 1e-12);
  try {
    solve_riccati(p, ComplexDomainPoint(cv({2.0}), p.shape), 3.0);
    FAIL("expected a finite-lifetime error");
  } catch (const FiniteLifetimeError& e) {
    CHECK(e.t_lo() <= tstar);
    CHECK(e.t_hi() >= tstar - 1e-6);
    CHECK(e.t_hi() - e.t_lo() < 0.1);
  }
  CHECK_NOTHROW(solve_riccati(p, ComplexDomainPoint(cv({2.0}), p.shape), 1.0));
}

TEST_CASE("semiflow identity and domain invariance over random draws") {
  const auto m = make_jacobi_heston_credit();
  const auto& shape = m.params.shape;
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 2.0);
  RiccatiOptions opt;
  double worst = 0.0;
  for (int k = 0; k < 25; ++k) {
    CVec u(4);
    for (int i = 0; i < 3; ++i) u[i] = {-std::abs(nd(gen)) * 0.3, nd(gen)};
    u[3] = {0.0, nd(gen)};
    const double s = unif(gen), t = unif(gen);
    const auto whole = solve_riccati(m.params, ComplexDomainPoint(u, shape), s + t, opt);
    const auto first = solve_riccati(m.params, ComplexDomainPoint(u, shape), t, opt);
    const auto second = solve_riccati(m.params, ComplexDomainPoint(first.value(t), shape), s, opt);
    const CVec lhs = whole.value(s + t);
    const CVec rhs = second.value(s);
    for (int i = 0; i < 4; ++i) {
      const double scale = opt.tol.abs + opt.tol.rel * std::abs(lhs[i]);
      worst = std::max(worst, std::abs(lhs[i] - rhs[i]) / scale);
    }
    for (double tt : whole.times()) {
      const CVec v = whole.value(tt);
      CHECK(ComplexDomainPoint(v, shape).in_U(opt.tol.abs));
    }
  }
  MESSAGE("worst semiflow discrepancy in tolerance units: " << worst);
  CHECK(worst <= 2.0);
}

TEST_CASE("tighter tolerance reduces the error against the CIR oracle") {
  const auto p = fixture::cir_1d(0.3, 0.0, -0.8);
  const Complex w(-1.0, 6.0);
  double prev = -1.0;
  for (double tol : {1e-5, 5e-6, 2.5e-6}) {
    RiccatiOptions opt;
    opt.tol = {tol, tol};
    opt.max_step_fraction = 0.0;
    const auto path = solve_riccati(p, ComplexDomainPoint(cv({w}), p.shape), 4.0, opt);
    double err = 0.0;
    for (double t : path.times()) err = std::max(err, std::abs(path.value(t)[0] - oracle::cir_riccati(0.3, -0.8, w, t)));
    MESSAGE("tol " << tol << " error " << err);
    if (prev > 0.0) CHECK(err <= prev / 2.0 * 1.05);
    prev = err;
  }
}
