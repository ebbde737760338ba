#include "modaff/pricing.hpp"

#include "modaff/csv.hpp"
#include "modaff/parallel.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <numbers>
#include <sstream>

namespace modaff {

namespace {

using boost::math::quadrature::gauss_kronrod;

/// Phi(v) = transform(u_d e_c + i v e_c), memoised in v so strike grids share evaluations.
class FourierTransformTable {
 public:
  FourierTransformTable(const ModelSpec& m, const PayoffKernel& h, double T, const DiscountSpec& d,
                        const TransformNumerics& num)
      : m_(m), h_(h), T_(T), d_(d), num_(num) {}

  Complex operator()(double v) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = memo_.find(v);
      if (it != memo_.end()) return it->second;
    }
    TransformQuery q;
    q.u = (h_.u_damp.cast<Complex>() + Complex(0.0, v) * h_.A.col(0).cast<Complex>());
    q.T = T_;
    q.x = m_.x0;
    q.y = m_.y0;
    q.discount = d_;
    const Complex val = transform(m_.params, m_.modulator, q, num_).value;
    std::lock_guard<std::mutex> lock(mu_);
    memo_.emplace(v, val);
    return val;
  }

  std::size_t evaluations() const {
    std::lock_guard<std::mutex> lock(mu_);
    return memo_.size();
  }

 private:
  const ModelSpec& m_;
  const PayoffKernel& h_;
  double T_;
  DiscountSpec d_;
  TransformNumerics num_;
  mutable std::mutex mu_;
  std::map<double, Complex> memo_;
};

void check_damping(const ModelSpec& m, const PayoffKernel& h, double T, const DiscountSpec& d,
                   const TransformNumerics& num) {
  TransformQuery q;
  q.T = T;
  q.x = m.x0;
  q.y = m.y0;
  q.discount = d;
  try {
    exp_moment(m.params, m.modulator, h.u_damp, q, num);
  } catch (const FiniteLifetimeError& e) {
    throw MomentConditionError("damping " + std::to_string(h.damping) + " has no finite exponential moment at T = " +
                               std::to_string(T) + ": " + e.what());
  }
}

PriceResult integrate_fourier(const PayoffKernel& h, FourierTransformTable& phi, const PricingNumerics& num) {
  auto g = [&](double v) { return 2.0 * (phi(v) * h.h_tilde(v)).real(); };
  double V = num.v_start;
  while (std::abs(2.0 * phi(V) * h.h_tilde(V)) >= num.decay_threshold) {
    if (V >= num.v_max) {
      std::ostringstream os;
      os << "Fourier integrand has not decayed below " << num.decay_threshold << " by v = " << V;
      throw NumericalError(os.str());
    }
    V *= 2.0;
  }
  PriceResult res;
  double err = 0.0;
  res.price = gauss_kronrod<double, 31>::integrate(g, 0.0, V, static_cast<unsigned>(num.max_depth), num.rel_tol, &err);
  if (!(err <= std::max(num.abs_tol, 1e3 * num.rel_tol * std::abs(res.price)))) {
    throw NumericalError("Fourier quadrature did not converge (error estimate " + std::to_string(err) + ")");
  }
  res.error = err;
  res.cutoff = V;
  res.method = "fourier";
  return res;
}

std::string default_component(const ModelSpec& m, const InstrumentSpec& ins) {
  if (!ins.component.empty()) return ins.component;
  if (ins.kind == "moment") return m.component_names.front();
  for (const char* c : {"p", "y"}) {
    for (const auto& name : m.component_names) {
      if (name == c) return name;
    }
  }
  throw StructuralError("instrument " + ins.kind + " on model " + m.name + " needs an explicit component");
}

bool has_component(const ModelSpec& m, const std::string& c) {
  return std::find(m.component_names.begin(), m.component_names.end(), c) != m.component_names.end();
}

}  // namespace

std::string to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::call:
      return "call";
    case PayoffKind::put:
      return "put";
    case PayoffKind::digital:
      return "digital";
  }
  return "unknown";
}

PayoffKind payoff_kind_from_string(const std::string& s) {
  if (s == "call") return PayoffKind::call;
  if (s == "put") return PayoffKind::put;
  if (s == "digital") return PayoffKind::digital;
  throw StructuralError("unknown payoff kind '" + s + "'");
}

Complex PayoffKernel::h_tilde(double v) const {
  const Complex z(damping, v);
  const double lk = std::log(strike);
  if (kind == PayoffKind::digital) return std::exp(-z * lk) / (2.0 * std::numbers::pi * z);
  return std::exp((1.0 - z) * lk) / (2.0 * std::numbers::pi * z * (z - 1.0));
}

double PayoffKernel::payoff(double y) const {
  const double s = std::exp(y);
  switch (kind) {
    case PayoffKind::call:
      return std::max(s - strike, 0.0);
    case PayoffKind::put:
      return std::max(strike - s, 0.0);
    case PayoffKind::digital:
      return s > strike ? 1.0 : 0.0;
  }
  return 0.0;
}

double PayoffKernel::reconstruct(double y) const {
  auto g = [&](double v) { return 2.0 * (std::exp(Complex(damping, v) * y) * h_tilde(v)).real(); };
  const double V0 = 40.0;
  double total = gauss_kronrod<double, 61>::integrate(g, 0.0, V0, 20, 1e-13);
  const double s = y - std::log(strike);
  if (std::abs(s) < 1e-9) {
    boost::math::quadrature::exp_sinh<double> es;
    return total + es.integrate([&](double t) { return g(V0 + t); }, 1e-13);
  }
  // Oscillatory tail: integrate half-periods and accelerate the alternating partial sums.
  const double P = std::numbers::pi / std::abs(s);
  std::vector<double> partial;
  double acc = 0.0;
  for (int k = 0; k < 48; ++k) {
    acc += gauss_kronrod<double, 31>::integrate(g, V0 + k * P, V0 + (k + 1) * P, 10, 1e-13);
    partial.push_back(acc);
  }
  for (int pass = 0; pass < 24; ++pass) {
    for (std::size_t i = 0; i + 1 < partial.size(); ++i) partial[i] = 0.5 * (partial[i] + partial[i + 1]);
    partial.pop_back();
  }
  return total + partial.back();
}

PayoffKernel build_payoff_kernel(PayoffKind kind, double strike, int component, int n, std::optional<double> damping) {
  if (!(strike > 0.0)) throw StructuralError("strike must be positive");
  if (component < 0 || component >= n) throw StructuralError("payoff component out of range");
  PayoffKernel h;
  h.kind = kind;
  h.strike = strike;
  h.component = component;
  h.n = n;
  h.damping = damping.value_or(kind == PayoffKind::put ? -1.5 : 1.5);
  if (kind == PayoffKind::call && !(h.damping > 1.0)) throw StructuralError("call damping must exceed 1");
  if (kind == PayoffKind::put && !(h.damping < 0.0)) throw StructuralError("put damping must be negative");
  if (kind == PayoffKind::digital && !(h.damping > 0.0)) throw StructuralError("digital damping must be positive");
  h.A = Mat::Zero(n, 1);
  h.A(component, 0) = 1.0;
  h.u_damp = Vec::Zero(n);
  h.u_damp[component] = h.damping;
  return h;
}

DiscountSpec short_rate_discount(const ModelSpec& m) {
  DiscountSpec d = DiscountSpec::none(m.n());
  if (has_component(m, "r")) {
    d.lambda[m.index_of("r")] = -1.0;
  } else {
    d.l = m.discount.l;
  }
  return d;
}

DiscountSpec survival_discount(const ModelSpec& m) {
  if (!has_component(m, "r") || !has_component(m, "gamma")) {
    throw StructuralError("model " + m.name + " has no short rate and hazard rate for survival claims");
  }
  DiscountSpec d = DiscountSpec::none(m.n());
  d.lambda[m.index_of("r")] = -1.0;
  d.lambda[m.index_of("gamma")] = -1.0;
  return d;
}

PriceResult price_claim(const ModelSpec& m, const PayoffKernel& h, double T, const DiscountSpec& d,
                        const PricingNumerics& num) {
  if (h.n != m.n()) throw StructuralError("payoff kernel dimension does not match the model");
  if (T == 0.0) {
    PriceResult r;
    r.price = h.payoff(m.y0[h.component]);
    r.method = "intrinsic";
    return r;
  }
  check_damping(m, h, T, d, num.transform);
  FourierTransformTable phi(m, h, T, d, num.transform);
  PriceResult r = integrate_fourier(h, phi, num);
  r.evaluations = phi.evaluations();
  return r;
}

PriceResult price_survival_claim(const ModelSpec& m, const PayoffKernel& h, double T, const PricingNumerics& num) {
  return price_claim(m, h, T, survival_discount(m), num);
}

namespace {

PriceResult bond_like(const ModelSpec& m, double T, const DiscountSpec& d, const PricingNumerics& num) {
  TransformQuery q;
  q.u = CVec::Zero(m.n());
  q.T = T;
  q.x = m.x0;
  q.y = m.y0;
  q.discount = d;
  const auto r = transform(m.params, m.modulator, q, num.transform);
  PriceResult out;
  out.price = r.value.real();
  out.error = r.error_estimate;
  out.method = r.method;
  out.evaluations = 1;
  return out;
}

}  // namespace

PriceResult price_bond(const ModelSpec& m, double T, const PricingNumerics& num) {
  return bond_like(m, T, short_rate_discount(m), num);
}

PriceResult price_survival_bond(const ModelSpec& m, double T, const PricingNumerics& num) {
  return bond_like(m, T, survival_discount(m), num);
}

std::vector<PriceResult> price_strikes(const ModelSpec& m, PayoffKind kind, const std::vector<double>& strikes,
                                       int component, double T, const DiscountSpec& d, const PricingNumerics& num) {
  std::vector<PriceResult> out(strikes.size());
  if (strikes.empty()) return out;
  // The damping row and the transform values do not depend on the strike.
  const PayoffKernel first = build_payoff_kernel(kind, strikes.front(), component, m.n());
  if (T > 0.0) check_damping(m, first, T, d, num.transform);
  FourierTransformTable phi(m, first, T, d, num.transform);
  parallel_for(strikes.size(), num.threads, [&](std::size_t i) {
    const PayoffKernel h = build_payoff_kernel(kind, strikes[i], component, m.n(), first.damping);
    if (T == 0.0) {
      out[i].price = h.payoff(m.y0[component]);
      out[i].method = "intrinsic";
      return;
    }
    out[i] = integrate_fourier(h, phi, num);
  });
  for (auto& r : out) r.evaluations = phi.evaluations();
  return out;
}

DiscountSpec instrument_discount(const ModelSpec& m, const InstrumentSpec& ins) {
  if (ins.kind == "moment") return DiscountSpec::none(m.n());
  if (ins.kind == "survival-bond" || ins.survival) return survival_discount(m);
  return short_rate_discount(m);
}

PriceResult price_instrument(const ModelSpec& m, const InstrumentSpec& ins, const PricingNumerics& num) {
  if (ins.kind == "bond") return ins.survival ? price_survival_bond(m, ins.T, num) : price_bond(m, ins.T, num);
  if (ins.kind == "survival-bond") return price_survival_bond(m, ins.T, num);
  const int c = m.index_of(default_component(m, ins));
  if (ins.kind == "moment") {
    Vec u = Vec::Zero(m.n());
    u[c] = ins.u;
    TransformQuery q;
    q.T = ins.T;
    q.x = m.x0;
    q.y = m.y0;
    const auto r = exp_moment(m.params, m.modulator, u, q, num.transform);
    PriceResult out;
    out.price = r.value.real();
    out.error = r.error_estimate;
    out.method = r.method;
    out.evaluations = 1;
    return out;
  }
  const PayoffKernel h = build_payoff_kernel(payoff_kind_from_string(ins.kind), ins.strike, c, m.n(), ins.damping);
  return price_claim(m, h, ins.T, instrument_discount(m, ins), num);
}

std::vector<PriceResult> price_instruments(const ModelSpec& m, const std::vector<InstrumentSpec>& ins,
                                           const PricingNumerics& num) {
  std::vector<PriceResult> out(ins.size());
  std::vector<bool> done(ins.size(), false);
  for (std::size_t i = 0; i < ins.size(); ++i) {
    if (done[i]) continue;
    const auto& a = ins[i];
    const bool payoff = a.kind == "call" || a.kind == "put" || a.kind == "digital";
    if (!payoff || a.damping) {
      out[i] = price_instrument(m, a, num);
      done[i] = true;
      continue;
    }
    const std::string comp = default_component(m, a);
    std::vector<std::size_t> group;
    for (std::size_t j = i; j < ins.size(); ++j) {
      const auto& b = ins[j];
      if (!done[j] && b.kind == a.kind && b.T == a.T && b.survival == a.survival && !b.damping &&
          default_component(m, b) == comp) {
        group.push_back(j);
      }
    }
    std::vector<double> strikes;
    for (auto j : group) strikes.push_back(ins[j].strike);
    const auto res = price_strikes(m, payoff_kind_from_string(a.kind), strikes, m.index_of(comp), a.T,
                                   instrument_discount(m, a), num);
    for (std::size_t k = 0; k < group.size(); ++k) {
      out[group[k]] = res[k];
      done[group[k]] = true;
    }
  }
  return out;
}

PriceResult price_instrument_mc(const ModelSpec& m, const InstrumentSpec& ins, const PathBundle& b) {
  const DiscountSpec d = instrument_discount(m, ins);
  const bool discounted = !d.is_zero();
  if (discounted && b.discount.empty()) throw StructuralError("bundle does not track the instrument's discount");
  if (std::abs(b.times.back() - ins.T) > 1e-12 * std::max(1.0, ins.T)) {
    throw StructuralError("bundle horizon does not match the instrument maturity");
  }
  std::function<double(const Vec&)> payoff;
  if (ins.kind == "bond" || ins.kind == "survival-bond") {
    payoff = [](const Vec&) { return 1.0; };
  } else {
    const int c = m.index_of(default_component(m, ins));
    if (ins.kind == "moment") {
      payoff = [c, u = ins.u](const Vec& y) { return std::exp(u * y[c]); };
    } else {
      const PayoffKernel h = build_payoff_kernel(payoff_kind_from_string(ins.kind), ins.strike, c, m.n(), ins.damping);
      payoff = [h, c](const Vec& y) { return h.payoff(y[c]); };
    }
  }
  const std::size_t k = b.last();
  double sum = 0.0, sq = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    if (b.aborted[i]) continue;
    double v = payoff(b.Y(i, k));
    if (discounted) v *= std::exp(b.discount_integral(i, k));
    sum += v;
    sq += v * v;
    ++cnt;
  }
  if (cnt < 2) throw NumericalError("Monte Carlo price needs at least two surviving paths");
  PriceResult r;
  r.price = sum / static_cast<double>(cnt);
  r.error = std::sqrt(std::max(0.0, sq / static_cast<double>(cnt) - r.price * r.price) / static_cast<double>(cnt - 1));
  r.method = "monte-carlo";
  r.evaluations = cnt;
  return r;
}

void write_price_csv(const std::vector<PriceRow>& rows, const std::string& path) {
  CsvWriter w(path, {"instrument", "T", "K", "price", "err", "method"});
  for (const auto& row : rows) {
    w.row({row.instrument.kind, fmt(row.instrument.T), fmt(row.instrument.strike), fmt(row.result.price),
           fmt(row.result.error), row.result.method});
  }
}

}  // namespace modaff
