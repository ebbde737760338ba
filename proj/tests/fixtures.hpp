#pragma once

#include "modaff/models.hpp"

#include <initializer_list>

namespace fixture {

using namespace modaff;

inline CVec cv(std::initializer_list<Complex> v) {
  CVec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (auto z : v) out[i++] = z;
  return out;
}

/// jacobi-heston-credit with the short-rate and hazard blocks switched off.
inline ModelSpec pure_heston() {
  return make_jacobi_heston_credit({{"alpha_r", 0.0}, {"bbar_r", 0.0}, {"b_r", 0.0}, {"beta_r", 0.0},
                                    {"alpha_g", 0.0}, {"bbar_g", 0.0}, {"b_g", 0.0}, {"beta_g", 0.0},
                                    {"r0", 0.0}, {"g0", 0.0}});
}

/// One-dimensional CIR: dr = (b + beta r) dt + sqrt(2 alpha r) dW.
inline XAdmissibleParams cir_1d(double alpha, double b, double beta) {
  auto p = XAdmissibleParams::zero(StateSpaceShape(1, 1));
  p.alpha = {Mat::Constant(1, 1, alpha)};
  p.b = VectorField::constant(Vec::Constant(1, b));
  p.beta = Mat::Constant(1, 1, beta);
  return p;
}

/// A chain with the single state x0.
inline FiniteChainModulator frozen(double x0) { return make_chain({x0}, Mat::Zero(1, 1)); }

/// The Heston parameters implied by jacobi-heston-credit settings at modulator state x.
struct HestonMap {
  double kappa, theta, xi, rho;
};
inline HestonMap heston_map(const ModelSpec& m, double x) {
  const auto& s = m.settings;
  const double kappa = -s.at("beta_v");
  const double bv = s.at("bbar_v") + s.at("b_v") * (1.0 - x);
  return {kappa, bv / kappa, std::sqrt(2.0 * s.at("alpha_v")), std::sqrt(2.0) * s.at("rho")};
}

}  // namespace fixture
