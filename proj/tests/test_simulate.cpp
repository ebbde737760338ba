#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "modaff/simulate.hpp"
#include "modaff/transform.hpp"

#include <filesystem>
#include <fstream>

using namespace modaff;
using fixture::cv;

TEST_CASE("characteristics: linear terms vanish at y = 0") {
  const auto m = make_jacobi_heston_credit();
  for (double x : {0.0, 0.4, 1.0}) {
    const auto ch = characteristics_at(m.params, x, Vec::Zero(4));
    CHECK((ch.drift - m.params.b(x)).norm() < 1e-15);
    CHECK((ch.diffusion - 2.0 * m.params.a(x)).norm() < 1e-15);
    CHECK(ch.jump_rate == 0.0);
  }
}

TEST_CASE("characteristics: Heston block of the credit model") {
  const auto m = make_jacobi_heston_credit();
  const auto& s = m.settings;
  const double v = 0.07;
  const auto ch = characteristics_at(m.params, 0.3, (Vec(4) << 0.02, 0.01, v, 0.4).finished());
  const double av = s.at("alpha_v"), rho = s.at("rho");
  CHECK(ch.diffusion(2, 2) == doctest::Approx(2 * av * v).epsilon(1e-14));
  CHECK(ch.diffusion(2, 3) == doctest::Approx(2 * std::sqrt(av) * rho * v).epsilon(1e-14));
  CHECK(ch.diffusion(3, 2) == ch.diffusion(2, 3));
  CHECK(ch.diffusion(3, 3) == doctest::Approx(v).epsilon(1e-14));
  CHECK(ch.diffusion(0, 0) == doctest::Approx(2 * s.at("alpha_r") * 0.02).epsilon(1e-14));
}

TEST_CASE("characteristics: Hawkes drift gains the Dirac truncation") {
  const auto m = make_mm_hawkes();
  const double delta = m.settings.at("delta"), beta = m.settings.at("beta");
  const double lam = 1.7;
  const auto ch = characteristics_at(m.params, 1.0, (Vec(2) << 3.0, lam).finished());
  // The count gains chi_N(1, delta) = 1 per unit intensity; the intensity keeps
  // its generator drift b + (beta + min(delta, 1)) lambda.
  CHECK(ch.drift[0] == doctest::Approx(lam));
  CHECK(ch.drift[1] == doctest::Approx(m.settings.at("b_1") + (beta + std::min(delta, 1.0)) * lam));
  CHECK(ch.jump_rate == doctest::Approx(lam));
  CHECK(ch.jump_chi_mean[0] == doctest::Approx(lam));
  CHECK(ch.jump_chi_mean[1] == doctest::Approx(lam * std::min(delta, 1.0)));
}

TEST_CASE("characteristics and simulation refuse killing") {
  auto p = fixture::cir_1d(0.02, 0.03, -0.5);
  p.gamma = Vec::Constant(1, 0.1);
  CHECK_THROWS_AS(characteristics_at(p, 0.0, Vec::Constant(1, 0.1)), RefusalError);
  SimulationOptions opt;
  opt.n_paths = 2;
  CHECK_THROWS_AS(simulate_paths(p, fixture::frozen(0.0), 0.0, Vec::Constant(1, 0.1), 1.0, opt), RefusalError);
}

TEST_CASE("simulate: zero parameters keep Y constant") {
  const auto p = XAdmissibleParams::zero(StateSpaceShape(1, 2));
  const auto m = make_regime_cir();
  SimulationOptions opt;
  opt.n_paths = 50;
  opt.dt = 1.0 / 32;
  opt.report_dt = 0.25;
  const Vec y0 = (Vec(2) << 0.7, -1.2).finished();
  const auto b = simulate_paths(p, m.modulator, 0.0, y0, 1.0, opt);
  CHECK(b.times.size() == 5);
  bool switched = false;
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    for (std::size_t k = 0; k < b.times.size(); ++k) {
      CHECK(b.Y(i, k) == y0);
      switched |= b.X(i, k) != 0.0;
    }
  }
  CHECK(switched);
  const auto e = empirical_transform(b, cv({{0.0, 1.0}, {0.0, 2.0}}));
  CHECK(std::abs(e.mean - std::exp(Complex(0.0, 0.7 - 2.4))) < 1e-14);
  CHECK(e.stderr_ < 1e-14);
  const auto one = empirical_transform(b, CVec::Zero(2));
  CHECK(one.mean == Complex(1.0));
  CHECK(one.stderr_ == 0.0);
}

TEST_CASE("simulate: CIR mean under a frozen modulator") {
  const double alpha = 0.02, bb = 0.03, beta = -0.5, r0 = 0.01, T = 2.0;
  SimulationOptions opt;
  opt.n_paths = 40000;
  opt.dt = 1.0 / 128;
  opt.seed = 3;
  const auto b = simulate_paths(fixture::cir_1d(alpha, bb, beta), fixture::frozen(0.0), 0.0, Vec::Constant(1, r0), T, opt);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    const double r = b.Y(i, b.last())[0];
    sum += r;
    sq += r * r;
  }
  const double n = static_cast<double>(b.n_paths);
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - oracle::cir_mean(r0, bb, beta, T)) < 4 * se);
}

TEST_CASE("simulate: Hawkes expected count under a frozen modulator") {
  auto m = make_mm_hawkes();
  SimulationOptions opt;
  opt.n_paths = 40000;
  opt.dt = 1.0 / 256;
  opt.seed = 4;
  const double T = 1.0;
  const auto b = simulate_paths(m.params, fixture::frozen(0.0), 0.0, m.y0, T, opt);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    const double N = b.Y(i, b.last())[0];
    sum += N;
    sq += N * N;
  }
  const double n = static_cast<double>(b.n_paths);
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  const auto& s = m.settings;
  const double expect = oracle::hawkes_mean_count(s.at("lambda0"), s.at("b_0"), s.at("beta"), s.at("delta"), T);
  MESSAGE("Hawkes E[N] " << mean << " +- " << se << " vs " << expect);
  CHECK(std::abs(mean - expect) < 4 * se);
  CHECK(b.metadata.at("thinning_bound_violations") == 0.0);
}

TEST_CASE("simulate: positivity and counting paths") {
  const auto m = make_mm_hawkes();
  SimulationOptions opt;
  opt.n_paths = 200;
  opt.dt = 1.0 / 64;
  opt.report_dt = 1.0 / 64;
  const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, 2.0, opt);
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    for (std::size_t k = 0; k < b.times.size(); ++k) {
      const auto y = b.Y(i, k);
      CHECK(y.minCoeff() >= 0.0);
      CHECK(y[0] == std::round(y[0]));
      if (k > 0) CHECK(y[0] >= b.Y(i, k - 1)[0]);
    }
  }
  const auto jh = make_jacobi_heston_credit({{"v0", 0.001}});
  const auto bj = simulate_paths(jh.params, jh.modulator, jh.x0, jh.y0, 1.0, opt);
  double lo = 1.0;
  for (std::size_t i = 0; i < bj.n_paths; ++i) {
    for (std::size_t k = 0; k < bj.times.size(); ++k) lo = std::min(lo, bj.Y(i, k).head(3).minCoeff());
  }
  CHECK(lo >= 0.0);
}

TEST_CASE("simulate: one-step moments match the characteristics") {
  const auto m = make_jacobi_heston_credit();
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double x = U(gen);
    const Vec y = (Vec(4) << 0.1 * U(gen) + 0.01, 0.05 * U(gen) + 0.01, 0.2 * U(gen) + 0.02, U(gen) - 0.5).finished();
    const auto ch = characteristics_at(m.params, x, y);
    for (double dt : {1.0 / 64, 1.0 / 128}) {
      SimulationOptions opt;
      opt.n_paths = 4000;
      opt.dt = dt;
      opt.seed = 100 + trial;
      const auto b = simulate_paths(m.params, m.modulator, x, y, dt, opt);
      Vec mean = Vec::Zero(4);
      Mat cov = Mat::Zero(4, 4);
      for (std::size_t i = 0; i < b.n_paths; ++i) mean += b.Y(i, 1) - y;
      mean /= static_cast<double>(b.n_paths);
      for (std::size_t i = 0; i < b.n_paths; ++i) {
        const Vec d = b.Y(i, 1) - y - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(b.n_paths - 1);
      for (int c = 0; c < 4; ++c) {
        const double se = std::sqrt(ch.diffusion(c, c) * dt / static_cast<double>(b.n_paths));
        CHECK(std::abs(mean[c] - ch.drift[c] * dt) <= 4.5 * se + 1e-15);
        // Sample variance of a normal has relative sd sqrt(2 / N).
        CHECK(std::abs(cov(c, c) - ch.diffusion(c, c) * dt) <= 4.5 * std::sqrt(2.0 / b.n_paths) * ch.diffusion(c, c) * dt + 1e-18);
      }
    }
  }
}

TEST_CASE("simulate: discounted stock is a martingale") {
  const auto m = make_jacobi_heston_credit();
  SimulationOptions opt;
  opt.n_paths = 20000;
  opt.dt = 1.0 / 256;
  opt.seed = 21;
  opt.discount = DiscountSpec{0.0, (Vec(4) << -1.0, -1.0, 0.0, 0.0).finished()};
  const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  EmpiricalOptions eo;
  eo.discounted = true;
  const auto e = empirical_transform(b, cv({0.0, 0.0, 0.0, 1.0}), eo);
  CHECK(std::abs(e.mean - std::exp(m.y0[3])) < 3 * e.stderr_);
}

TEST_CASE("simulate: CGMY forward is a martingale") {
  const auto m = make_mm_cgmy();
  SimulationOptions opt;
  opt.n_paths = 20000;
  opt.dt = 1.0 / 128;
  opt.seed = 8;
  opt.discount = m.discount;
  const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  EmpiricalOptions eo;
  eo.discounted = true;
  const auto e = empirical_transform(b, cv({1.0}), eo);
  MESSAGE("CGMY discounted forward " << e.mean << " +- " << e.stderr_);
  CHECK(std::abs(e.mean - 1.0) < 3 * e.stderr_);
  CHECK(b.metadata.at("thinning_accepted") > 0.0);
}

TEST_CASE("simulate: inverse-compensator default matches the survival transform") {
  const auto m = make_jacobi_heston_credit({{"g0", 0.3}, {"bbar_g", 0.2}});
  SimulationOptions opt;
  opt.n_paths = 20000;
  opt.dt = 1.0 / 256;
  opt.seed = 13;
  opt.default_component = m.index_of("gamma");
  const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  EmpiricalOptions eo;
  eo.survival = true;
  const auto e = empirical_transform(b, CVec::Zero(4), eo);
  TransformQuery q;
  q.u = CVec::Zero(4);
  q.T = 1.0;
  q.x = m.x0;
  q.y = m.y0;
  q.discount = DiscountSpec{0.0, (Vec(4) << 0.0, -1.0, 0.0, 0.0).finished()};
  const auto r = transform(m.params, m.modulator, q);
  MESSAGE("survival " << e.mean.real() << " +- " << e.stderr_ << " vs " << r.value.real());
  CHECK(std::abs(e.mean - r.value) < 3 * e.stderr_);
}

TEST_CASE("simulate: empirical transform agrees with the transform") {
  const auto m = make_jacobi_heston_credit();
  SimulationOptions opt;
  opt.n_paths = 20000;
  opt.dt = 1.0 / 256;
  opt.seed = 17;
  const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  for (const CVec& u : {cv({0.0, 0.0, 0.0, {0.0, 1.0}}), cv({{0.0, 5.0}, {0.0, -5.0}, {0.0, 2.0}, {0.0, -2.0}})}) {
    TransformQuery q;
    q.u = u;
    q.T = 1.0;
    q.x = m.x0;
    q.y = m.y0;
    const auto r = transform(m.params, m.modulator, q);
    const auto e = empirical_transform(b, u);
    CHECK(std::abs(e.mean - r.value) < 3 * e.stderr_);
  }
}

TEST_CASE("simulate: bundles are bit-identical across thread counts") {
  const auto m = make_mm_cgmy();
  SimulationOptions opt;
  opt.n_paths = 300;
  opt.dt = 1.0 / 64;
  opt.report_dt = 0.25;
  opt.seed = 99;
  const auto a = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  opt.threads = 8;
  const auto c = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  CHECK(a.y == c.y);
  CHECK(a.x == c.x);
  opt.seed = 100;
  const auto d = simulate_paths(m.params, m.modulator, m.x0, m.y0, 1.0, opt);
  CHECK(a.y != d.y);

  const auto dir = std::filesystem::temp_directory_path();
  write_paths_csv(a, (dir / "modaff_paths.csv").string(), 3);
  write_summary_csv(a, (dir / "modaff_summary.csv").string());
  std::ifstream in((dir / "modaff_paths.csv").string());
  std::string header;
  std::getline(in, header);
  CHECK(header == "path,t,x,y1");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3 * 5);
}
