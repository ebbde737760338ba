#include "oracles.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>

namespace oracle {

namespace {

template <class M>
M expm_impl(const M& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.25) s = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
  const M x = a / std::ldexp(1.0, s);
  M term = M::Identity(a.rows(), a.cols());
  M sum = term;
  for (int k = 1; k <= 24; ++k) {
    term = (term * x) / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

Complex em1l(Complex z) {
  if (std::abs(z) < 0.5) {
    Complex term = z * z / 2.0, sum = term;
    for (int k = 3; k < 40; ++k) {
      term *= z / static_cast<double>(k);
      sum += term;
    }
    return sum;
  }
  return std::exp(z) - 1.0 - z;
}

/// int_0^inf (e^{wz} - 1 - w min(z,1)) z^{-1-Y} e^{-Mz} dz
Complex side(Complex w, double M, double Y) {
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  auto near = [&](double z, bool im) {
    if (z < 1e-100) return 0.0;
    const Complex v = em1l(w * z) / (z * z) * std::pow(z, 1.0 - Y) * std::exp(-M * z);
    return im ? v.imag() : v.real();
  };
  auto far = [&](double z, bool im) {
    const Complex v = (std::exp((w - M) * z) - (1.0 + w) * std::exp(-M * z)) * std::pow(z, -1.0 - Y);
    return im ? v.imag() : v.real();
  };
  const double tol = 1e-13;
  const double re = ts.integrate([&](double z) { return near(z, false); }, 0.0, 1.0, tol) +
                    es.integrate([&](double z) { return far(z + 1.0, false); }, 0.0,
                                 std::numeric_limits<double>::infinity(), tol);
  const double im = ts.integrate([&](double z) { return near(z, true); }, 0.0, 1.0, tol) +
                    es.integrate([&](double z) { return far(z + 1.0, true); }, 0.0,
                                 std::numeric_limits<double>::infinity(), tol);
  return {re, im};
}

double cir_B(double alpha, double beta, double t) {
  const double kappa = -beta;
  const double h = std::sqrt(beta * beta + 4.0 * alpha);
  const double e = std::expm1(h * t);
  return -2.0 * e / ((h + kappa) * e + 2.0 * h);
}

}  // namespace

Mat expm(const Mat& a) { return expm_impl(a); }
CMat expm(const CMat& a) { return expm_impl(a); }

CirBond cir_bond(double alpha, double b, double beta, double T) {
  CirBond out;
  if (alpha == 0.0) {
    // Deterministic limit.
    out.B = std::expm1(beta * T) / beta;
    out.A = b * (out.B - T) / beta;
    return out;
  }
  const double kappa = -beta;
  const double h = std::sqrt(beta * beta + 4.0 * alpha);
  const double e = std::expm1(h * T);
  const double den = (h + kappa) * e + 2.0 * h;
  // sigma^2 = 2 alpha, kappa theta = b
  out.B = -2.0 * e / den;
  out.A = (b / alpha) * std::log(2.0 * h * std::exp(0.5 * (kappa + h) * T) / den);
  return out;
}

Complex cir_riccati(double alpha, double beta, Complex w, double t) {
  if (w == 0.0) return 0.0;
  const Complex inv = -alpha / beta + (1.0 / w + alpha / beta) * std::exp(-beta * t);
  return 1.0 / inv;
}

double cir_explosion_time(double alpha, double beta, double w) {
  // 1/psi = -alpha/beta + (1/w + alpha/beta) e^{-beta t} hits zero.
  const double ratio = (alpha / beta) / (1.0 / w + alpha / beta);
  if (!(ratio > 0.0)) return std::numeric_limits<double>::infinity();
  const double t = -std::log(ratio) / beta;
  return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

double cir_mean(double r0, double b, double beta, double t) {
  return r0 * std::exp(beta * t) + b * std::expm1(beta * t) / beta;
}

Complex heston_transform(Complex s, double kappa, double theta, double xi, double rho, double v0, double T) {
  const Complex k = kappa - rho * xi * s;
  const Complex d = std::sqrt(k * k - xi * xi * (s * s - s));
  const Complex g = (k - d) / (k + d);
  const Complex e = std::exp(-d * T);
  const Complex D = (k - d) / (xi * xi) * (1.0 - e) / (1.0 - g * e);
  const Complex C = kappa * theta / (xi * xi) * ((k - d) * T - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
  return std::exp(C + D * v0);
}

Complex heston_D(Complex s, double kappa, double xi, double rho, double T) {
  const Complex k = kappa - rho * xi * s;
  const Complex d = std::sqrt(k * k - xi * xi * (s * s - s));
  const Complex g = (k - d) / (k + d);
  const Complex e = std::exp(-d * T);
  return (k - d) / (xi * xi) * (1.0 - e) / (1.0 - g * e);
}

Eigen::VectorXd regime_cir_bond(const Mat& Q, const Eigen::VectorXd& b, double alpha, double beta, double r0,
                                double T, int steps) {
  const int d = static_cast<int>(Q.rows());
  auto A = [&](double t) {
    Mat out = Q;
    const double B = cir_B(alpha, beta, t);
    for (int i = 0; i < d; ++i) out(i, i) += b[i] * B;
    return out;
  };
  Eigen::VectorXd phi = Eigen::VectorXd::Ones(d);
  const double h = T / steps;
  const double c1 = 0.5 - std::sqrt(3.0) / 6.0;
  const double c2 = 0.5 + std::sqrt(3.0) / 6.0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Mat A1 = A(t + c1 * h);
    const Mat A2 = A(t + c2 * h);
    const Mat omega = 0.5 * h * (A1 + A2) + std::sqrt(3.0) / 12.0 * h * h * (A2 * A1 - A1 * A2);
    phi = expm(omega) * phi;
  }
  return phi * std::exp(cir_B(alpha, beta, T) * r0);
}

Eigen::VectorXcd chain_constant_reaction(const Mat& Q, const Eigen::VectorXcd& f, double t) {
  CMat A = Q.cast<Complex>();
  for (int i = 0; i < f.size(); ++i) A(i, i) += f[i];
  return expm(CMat(A * t)) * Eigen::VectorXcd::Ones(f.size());
}

double hawkes_mean_count(double lambda0, double b, double beta, double delta, double T) {
  const double a = beta + delta;
  if (std::abs(a) < 1e-14) return lambda0 * T + 0.5 * b * T * T;
  const double inf = -b / a;
  return inf * T + (lambda0 - inf) * std::expm1(a * T) / a;
}

double black_scholes_call(double S0, double K, double r, double sigma, double T) {
  const double sd = sigma * std::sqrt(T);
  const double d1 = (std::log(S0 / K) + (r + 0.5 * sigma * sigma) * T) / sd;
  const double d2 = d1 - sd;
  auto N = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return S0 * N(d1) - K * std::exp(-r * T) * N(d2);
}

Complex cgmy_quadrature(Complex w, double C, double G, double M, double Y) {
  return C * (side(w, M, Y) + side(-w, G, Y));
}

}  // namespace oracle
