#pragma once

// Fourier pricing. A payoff h of one component y_c is written as
//   h(y) = int e^{(u_d + i v) y_c} h~(v) dv
// with, for z = u_d + i v,
//   call / put: h~(v) = K^{1-z} / (2 pi z (z - 1))   (u_d > 1 for calls, u_d < 0 for puts)
//   digital:    h~(v) = K^{-z} / (2 pi z)            (u_d > 0), h = 1{e^{y_c} > K}
// so that price = int transform(u_d e_c + i v e_c) h~(v) dv.

#include "modaff/models.hpp"
#include "modaff/simulate.hpp"
#include "modaff/transform.hpp"

namespace modaff {

enum class PayoffKind { call, put, digital };
std::string to_string(PayoffKind k);
PayoffKind payoff_kind_from_string(const std::string& s);

struct PayoffKernel {
  PayoffKind kind = PayoffKind::call;
  double strike = 1.0;
  int component = 0;
  int n = 1;
  Mat A;          // n x 1, the unit vector e_c
  Vec u_damp;     // n, u_d e_c
  double damping = 1.5;

  Complex h_tilde(double v) const;
  /// The payoff itself, evaluated directly.
  double payoff(double y) const;
  /// The payoff recomputed from its Fourier representation.
  double reconstruct(double y) const;
};

/// damping defaults: 1.5 for calls and digitals, -1.5 for puts.
PayoffKernel build_payoff_kernel(PayoffKind kind, double strike, int component, int n,
                                 std::optional<double> damping = std::nullopt);

struct PricingNumerics {
  TransformNumerics transform;
  double decay_threshold = 1e-10;   // |integrand| at the cut-off V
  double v_start = 8.0;
  double v_max = 4096.0;
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_depth = 15;
  int threads = 1;
};

struct PriceResult {
  double price = 0.0;
  double error = 0.0;
  std::string method;
  double cutoff = 0.0;
  std::size_t evaluations = 0;
};

/// Discount -r (component "r" if present, else the model's constant l).
DiscountSpec short_rate_discount(const ModelSpec& m);
/// Discount -(r + gamma); needs components "r" and "gamma".
DiscountSpec survival_discount(const ModelSpec& m);

/// E[exp(int_0^T (l + <lambda, Y>)) h(Y_T)] by Fourier inversion.
PriceResult price_claim(const ModelSpec& m, const PayoffKernel& h, double T, const DiscountSpec& d,
                        const PricingNumerics& num = {});

/// The survival claim E[1{tau > T} e^{-int r} h(Y_T)] = E[e^{-int (r + gamma)} h(Y_T)].
PriceResult price_survival_claim(const ModelSpec& m, const PayoffKernel& h, double T, const PricingNumerics& num = {});

/// Default-free zero-coupon bond.
PriceResult price_bond(const ModelSpec& m, double T, const PricingNumerics& num = {});

/// Zero-recovery defaultable zero-coupon bond.
PriceResult price_survival_bond(const ModelSpec& m, double T, const PricingNumerics& num = {});

/// Prices on a strike grid; the transform values are shared across strikes.
std::vector<PriceResult> price_strikes(const ModelSpec& m, PayoffKind kind, const std::vector<double>& strikes,
                                       int component, double T, const DiscountSpec& d, const PricingNumerics& num = {});

struct InstrumentSpec {
  std::string kind;        // bond | survival-bond | call | put | digital | moment
  double T = 1.0;
  double strike = 1.0;
  std::string component;   // payoff / moment component (default: the model's price component)
  double u = -1.0;         // moment exponent
  std::optional<double> damping;
  bool survival = false;   // price a survival claim (credit model) instead of a default-free one
};

PriceResult price_instrument(const ModelSpec& m, const InstrumentSpec& ins, const PricingNumerics& num = {});

/// Prices a list of instruments; payoffs that differ only in the strike share
/// one transform table.
std::vector<PriceResult> price_instruments(const ModelSpec& m, const std::vector<InstrumentSpec>& ins,
                                           const PricingNumerics& num = {});

/// Monte Carlo price of the same instrument from a simulated bundle. The bundle
/// must carry the matching discount integral (see instrument_discount).
PriceResult price_instrument_mc(const ModelSpec& m, const InstrumentSpec& ins, const PathBundle& b);

/// Discount a bundle must track for price_instrument_mc.
DiscountSpec instrument_discount(const ModelSpec& m, const InstrumentSpec& ins);

struct PriceRow {
  InstrumentSpec instrument;
  PriceResult result;
};
/// CSV: instrument,T,K,price,err,method
void write_price_csv(const std::vector<PriceRow>& rows, const std::string& path);

}  // namespace modaff
