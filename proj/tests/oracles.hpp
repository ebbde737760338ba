#pragma once

// Independent reference solutions used by the unit and acceptance tests.
// Nothing here calls into the library's solvers.

#include <Eigen/Dense>

#include <complex>

namespace oracle {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
Mat expm(const Mat& a);
CMat expm(const CMat& a);

/// Short rate dr = (b + beta r) dt + sqrt(2 alpha r) dW (beta < 0).
/// Zero-coupon bond E[exp(-int_0^T r)] = exp(A + B r0).
struct CirBond {
  double A;
  double B;
};
CirBond cir_bond(double alpha, double b, double beta, double T);

/// Solution of psi' = alpha psi^2 + beta psi, psi(0) = w (beta != 0).
Complex cir_riccati(double alpha, double beta, Complex w, double t);

/// First time the real solution with w > 0 blows up (infinity if never).
double cir_explosion_time(double alpha, double beta, double w);

/// E[r_t] for the short rate above.
double cir_mean(double r0, double b, double beta, double t);

/// Heston log-price transform E[exp(s (p_T - p_0))] with
/// dv = kappa (theta - v) dt + xi sqrt(v) dW1, dp = -v/2 dt + sqrt(v) dW2,
/// d<W1,W2> = rho dt. Valid for complex s inside the moment strip.
Complex heston_transform(Complex s, double kappa, double theta, double xi, double rho, double v0, double T);

/// The coefficient D(T) of v0 in the Heston transform above.
Complex heston_D(Complex s, double kappa, double xi, double rho, double T);

/// Regime-switching CIR bond: phi' = (Q + diag(b_i B(t))) phi, phi(0) = 1,
/// where B is the CIR bond exponent; integrated by fourth-order Magnus steps.
/// Returns the bond price for each starting regime.
Eigen::VectorXd regime_cir_bond(const Mat& Q, const Eigen::VectorXd& b, double alpha, double beta, double r0,
                                double T, int steps = 4000);

/// phi(t) = expm((Q + diag f) t) 1.
Eigen::VectorXcd chain_constant_reaction(const Mat& Q, const Eigen::VectorXcd& f, double t);

/// Linear Hawkes with intensity lambda' = b + a lambda between events and jumps
/// of size delta at events: E[N_T] for lambda(0) = lambda0 (a = beta + delta).
double hawkes_mean_count(double lambda0, double b, double beta, double delta, double T);

double black_scholes_call(double S0, double K, double r, double sigma, double T);

/// Brute-force int (e^{wz} - 1 - w chi(z)) C |z|^{-1-Y} (e^{-Gz-} 1{z<0} + e^{-Mz} 1{z>0}) dz
/// with chi(z) = clamp(z, -1, 1), by double-exponential quadrature.
Complex cgmy_quadrature(Complex w, double C, double G, double M, double Y);

}  // namespace oracle
