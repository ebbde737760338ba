#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "modaff/pricing.hpp"

#include <filesystem>
#include <fstream>

using namespace modaff;
using fixture::cv;

namespace {

ModelSpec frozen_model(ModelSpec m) {
  m.modulator = fixture::frozen(m.x0);
  return m;
}

}  // namespace

TEST_CASE("pricing: call kernel reproduces the payoff") {
  const auto h = build_payoff_kernel(PayoffKind::call, 1.0, 0, 1);
  double worst = 0.0;
  for (int k = 0; k <= 40; ++k) {
    const double y = -2.0 + 0.1 * k;
    worst = std::max(worst, std::abs(h.reconstruct(y) - h.payoff(y)));
  }
  MESSAGE("call reconstruction error " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("pricing: put and digital kernels reproduce their payoffs") {
  const auto put = build_payoff_kernel(PayoffKind::put, 1.3, 0, 1);
  const auto dig = build_payoff_kernel(PayoffKind::digital, 1.3, 0, 1);
  double worst_put = 0.0, worst_dig = 0.0;
  for (int k = 0; k <= 40; ++k) {
    const double y = -2.0 + 0.1 * k;
    worst_put = std::max(worst_put, std::abs(put.reconstruct(y) - put.payoff(y)));
    if (std::abs(y - std::log(1.3)) > 0.05) worst_dig = std::max(worst_dig, std::abs(dig.reconstruct(y) - dig.payoff(y)));
  }
  MESSAGE("put " << worst_put << " digital " << worst_dig);
  CHECK(worst_put < 1e-6);
  CHECK(worst_dig < 1e-4);
}

TEST_CASE("pricing: kernel construction checks") {
  CHECK_THROWS_AS(build_payoff_kernel(PayoffKind::call, -1.0, 0, 1), StructuralError);
  CHECK_THROWS_AS(build_payoff_kernel(PayoffKind::call, 1.0, 0, 1, 0.5), StructuralError);
  CHECK_THROWS_AS(build_payoff_kernel(PayoffKind::put, 1.0, 0, 1, 0.5), StructuralError);
  CHECK_THROWS_AS(build_payoff_kernel(PayoffKind::digital, 1.0, 2, 2), StructuralError);
  CHECK(build_payoff_kernel(PayoffKind::put, 1.0, 0, 1).damping == -1.5);
  CHECK(payoff_kind_from_string("digital") == PayoffKind::digital);
}

TEST_CASE("pricing: bonds") {
  const auto m = make_regime_cir();
  CHECK(price_bond(m, 0.0).price == doctest::Approx(1.0).epsilon(1e-15));

  const auto cir = frozen_model(make_regime_cir({{"b_0", 0.02}}));
  const auto& s = cir.settings;
  for (double T : {0.5, 1.0, 5.0}) {
    const auto bond = oracle::cir_bond(s.at("alpha"), s.at("b_0"), s.at("beta"), T);
    CHECK(std::abs(price_bond(cir, T).price - std::exp(bond.A + bond.B * cir.y0[0])) < 1e-8);
  }

  const auto& chain = std::get<FiniteChainModulator>(m.modulator);
  Eigen::VectorXd b(2);
  b << m.settings.at("b_0"), m.settings.at("b_1");
  for (double T : {1.0, 3.0}) {
    const auto expect = oracle::regime_cir_bond(chain.Q, b, m.settings.at("alpha"), m.settings.at("beta"), m.y0[0], T);
    const auto got = price_bond(m, T).price;
    CHECK(std::abs(got - expect[0]) < 1e-8);
    CHECK(got > 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("pricing: defaultable bond factorizes under a frozen modulator") {
  const auto m = frozen_model(make_jacobi_heston_credit());
  const auto& s = m.settings;
  const double x0 = m.x0;
  for (double T : {0.5, 2.0}) {
    const auto rb = oracle::cir_bond(s.at("alpha_r"), s.at("bbar_r") + s.at("b_r") * x0, s.at("beta_r"), T);
    const auto gb = oracle::cir_bond(s.at("alpha_g"), s.at("bbar_g") + s.at("b_g") * (1 - x0), s.at("beta_g"), T);
    const double expect = std::exp(rb.A + rb.B * m.y0[0]) * std::exp(gb.A + gb.B * m.y0[1]);
    CHECK(std::abs(price_survival_bond(m, T).price - expect) < 1e-6);
  }
  const auto safe = make_jacobi_heston_credit({{"alpha_g", 0.0}, {"bbar_g", 0.0}, {"b_g", 0.0}, {"g0", 0.0}});
  CHECK(std::abs(price_survival_bond(safe, 1.0).price - price_bond(safe, 1.0).price) < 1e-12);
}

TEST_CASE("pricing: Black-Scholes limit") {
  const double r = 0.03, v = 0.04, T = 1.0;
  auto m = frozen_model(make_jacobi_heston_credit({{"alpha_r", 0.0}, {"bbar_r", 0.0}, {"b_r", 0.0}, {"beta_r", 0.0},
                                                   {"r0", r}, {"alpha_g", 0.0}, {"bbar_g", 0.0}, {"b_g", 0.0},
                                                   {"g0", 0.0}, {"alpha_v", 1e-8}, {"beta_v", -2.0},
                                                   {"bbar_v", 2.0 * v}, {"b_v", 0.0}, {"v0", v}}));
  for (double K : {0.8, 1.0, 1.25}) {
    InstrumentSpec ins;
    ins.kind = "call";
    ins.T = T;
    ins.strike = K;
    ins.survival = true;
    const auto p = price_instrument(m, ins);
    const double bs = oracle::black_scholes_call(1.0, K, r, std::sqrt(v), T);
    CHECK(std::abs(p.price - bs) < 1e-3);
  }
}

TEST_CASE("pricing: put-call parity and strike monotonicity") {
  const auto m = make_jacobi_heston_credit();
  const double T = 1.0;
  const int c = m.index_of("p");
  const std::vector<double> strikes{0.7, 0.85, 1.0, 1.15, 1.3};
  const auto d = survival_discount(m);
  const auto calls = price_strikes(m, PayoffKind::call, strikes, c, T, d);
  const auto puts = price_strikes(m, PayoffKind::put, strikes, c, T, d);
  const double bond = price_survival_bond(m, T).price;
  TransformQuery q;
  q.u = cv({0.0, 0.0, 0.0, 1.0});
  q.T = T;
  q.x = m.x0;
  q.y = m.y0;
  q.discount = d;
  const double forward = transform(m.params, m.modulator, q).value.real();
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    CHECK(std::abs(calls[i].price - puts[i].price - (forward - strikes[i] * bond)) < 1e-6);
    if (i) CHECK(calls[i].price <= calls[i - 1].price);
  }
  // Strike grids share the transform table.
  CHECK(calls.front().evaluations == calls.back().evaluations);
  PricingNumerics par;
  par.threads = 3;
  const auto calls3 = price_strikes(m, PayoffKind::call, strikes, c, T, d, par);
  for (std::size_t i = 0; i < strikes.size(); ++i) CHECK(calls3[i].price == calls[i].price);
}

TEST_CASE("pricing: heavy damping is refused") {
  const auto m = make_mm_cgmy();
  const auto h = build_payoff_kernel(PayoffKind::call, 1.0, 0, 1, 7.0);
  CHECK_THROWS_AS(price_claim(m, h, 1.0, m.discount), MomentConditionError);
}

TEST_CASE("pricing: Fourier and Monte Carlo agree on the built-in models") {
  struct Case {
    ModelSpec model;
    InstrumentSpec ins;
  };
  auto mk = [](std::string kind, double T, double K, bool survival = false) {
    InstrumentSpec i;
    i.kind = std::move(kind);
    i.T = T;
    i.strike = K;
    i.survival = survival;
    return i;
  };
  std::vector<Case> cases{{make_jacobi_heston_credit(), mk("call", 1.0, 1.0, true)},
                          {make_jacobi_heston_credit(), mk("put", 1.0, 0.9)},
                          {make_jacobi_heston_credit(), mk("survival-bond", 1.0, 1.0)},
                          {make_regime_cir(), mk("bond", 2.0, 1.0)},
                          {make_mm_cgmy(), mk("call", 1.0, 1.0)},
                          {make_mm_cgmy(), mk("digital", 1.0, 1.1)},
                          {make_mm_hawkes(), mk("moment", 1.0, 1.0)}};
  cases.back().ins.u = -0.5;
  for (const auto& [m, ins] : cases) {
    const auto f = price_instrument(m, ins);
    SimulationOptions opt;
    opt.n_paths = 20000;
    opt.dt = 1.0 / 128;
    opt.seed = 31;
    opt.discount = instrument_discount(m, ins);
    const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, ins.T, opt);
    const auto mc = price_instrument_mc(m, ins, b);
    MESSAGE(m.name << " " << ins.kind << ": fourier " << f.price << " mc " << mc.price << " +- " << mc.error);
    CHECK(std::abs(f.price - mc.price) < 3 * mc.error);
  }
}

TEST_CASE("pricing: price table CSV") {
  std::vector<PriceRow> rows;
  InstrumentSpec ins;
  ins.kind = "bond";
  rows.push_back({ins, price_bond(make_regime_cir(), 1.0)});
  const auto path = (std::filesystem::temp_directory_path() / "modaff_prices.csv").string();
  write_price_csv(rows, path);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "instrument,T,K,price,err,method");
  CHECK(line.rfind("bond,1,1,", 0) == 0);
}
