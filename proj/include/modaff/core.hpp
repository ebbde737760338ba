#pragma once

// Shared vocabulary for the modulated-affine library: linear algebra aliases,
// the error hierarchy, the state-space shape, the truncation function and
// x-indexed coefficient fields.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace modaff {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

// ---------------------------------------------------------------------------
// Errors. Every failure mode that a caller may want to map to a distinct exit
// status has its own type.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatches and malformed inputs (not an admissibility question).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A jump integral or exponential moment that does not exist for the input.
class MomentConditionError : public Error {
 public:
  using Error::Error;
};

/// Riccati solution left every bounded set before the requested horizon.
class FiniteLifetimeError : public Error {
 public:
  FiniteLifetimeError(double t_lo, double t_hi, const std::string& what)
      : Error(what), t_lo_(t_lo), t_hi_(t_hi) {}
  double t_lo() const { return t_lo_; }
  double t_hi() const { return t_hi_; }

 private:
  double t_lo_;
  double t_hi_;
};

/// The request is outside what a solver supports (killing in simulation,
/// kernels without a sampler, ...).
class RefusalError : public Error {
 public:
  using Error::Error;
};

/// Discretisation/quadrature diagnostics that make a result untrustworthy.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------

/// Y lives on R_+^m x R^(n-m); I = {0..m-1}, J = {m..n-1} (zero based).
struct StateSpaceShape {
  int m = 0;
  int n = 1;

  StateSpaceShape() = default;
  StateSpaceShape(int m_, int n_) : m(m_), n(n_) {
    if (n < 1 || m < 0 || m > n) {
      throw StructuralError("state space shape requires 0 <= m <= n, n >= 1 (got m=" +
                            std::to_string(m) + ", n=" + std::to_string(n) + ")");
    }
  }

  bool in_I(int k) const { return k >= 0 && k < m; }
  bool in_J(int k) const { return k >= m && k < n; }
  int dim_J() const { return n - m; }
};

/// Componentwise clamp to [-1, 1]; identity on the unit cube.
inline double truncate(double xi) { return std::clamp(xi, -1.0, 1.0); }

inline Vec truncate(const Vec& xi) { return xi.unaryExpr([](double v) { return truncate(v); }); }

/// u = (u+, u*) together with membership in U = C^m_- x iR^(n-m).
class ComplexDomainPoint {
 public:
  ComplexDomainPoint() = default;
  ComplexDomainPoint(CVec u, StateSpaceShape shape) : u_(std::move(u)), shape_(shape) {
    if (u_.size() != shape_.n) {
      throw StructuralError("complex point has dimension " + std::to_string(u_.size()) +
                            ", shape expects " + std::to_string(shape_.n));
    }
  }

  const CVec& value() const { return u_; }
  const StateSpaceShape& shape() const { return shape_; }
  CVec plus() const { return u_.head(shape_.m); }
  CVec star() const { return u_.tail(shape_.dim_J()); }

  bool in_U(double tol = 0.0) const {
    for (int i = 0; i < shape_.n; ++i) {
      const double re = u_[i].real();
      if (shape_.in_I(i) ? re > tol : std::abs(re) > tol) return false;
    }
    return true;
  }

 private:
  CVec u_;
  StateSpaceShape shape_;
};

/// Bilinear (not sesquilinear) form u^T A v.
inline Complex bilinear(const Mat& a, const CVec& u, const CVec& v) {
  return u.transpose() * (a.cast<Complex>() * v);
}

/// e^z - 1 - z without cancellation for small |z|.
inline Complex expm1_minus_linear(Complex z) {
  if (std::abs(z) < 0.25) {
    Complex term = z * z / 2.0;
    Complex sum = term;
    for (int k = 3; k < 30; ++k) {
      term *= z / static_cast<double>(k);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return std::exp(z) - 1.0 - z;
}

/// e^z - 1 accurate near zero.
inline Complex expm1(Complex z) {
  const double a = z.real();
  const double b = z.imag();
  const double s = std::sin(0.5 * b);
  return {std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b)};
}

// ---------------------------------------------------------------------------
// x-indexed coefficients. A field is constant, affine in x, tabulated at the
// numeric labels of a finite chain, or an arbitrary callable. The first three
// round-trip through scenario files.

template <class T>
class XField {
 public:
  enum class Kind { constant, affine, tabulated, callable };

  XField() = default;

  static XField constant(T value) {
    XField f;
    f.kind_ = Kind::constant;
    f.level_ = std::move(value);
    return f;
  }

  /// level + x * slope
  static XField affine(T level, T slope) {
    XField f;
    f.kind_ = Kind::affine;
    f.level_ = std::move(level);
    f.slope_ = std::move(slope);
    return f;
  }

  static XField tabulated(std::vector<double> states, std::vector<T> values) {
    if (states.size() != values.size() || states.empty()) {
      throw StructuralError("tabulated field needs one value per chain state");
    }
    std::vector<std::size_t> order(states.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return states[a] < states[b]; });
    XField f;
    f.kind_ = Kind::tabulated;
    for (auto i : order) {
      f.states_.push_back(states[i]);
      f.table_.push_back(values[i]);
    }
    f.level_ = f.table_.front();
    return f;
  }

  /// `sample` fixes the shape of the values (used for dimension checks).
  static XField callable(std::function<T(double)> fn, T sample) {
    XField f;
    f.kind_ = Kind::callable;
    f.fn_ = std::move(fn);
    f.level_ = std::move(sample);
    return f;
  }

  T operator()(double x) const {
    switch (kind_) {
      case Kind::constant:
        return level_;
      case Kind::affine:
        return level_ + x * slope_;
      case Kind::tabulated:
        return table_[lookup(x)];
      case Kind::callable:
        return fn_(x);
    }
    return level_;
  }

  Kind kind() const { return kind_; }
  const T& level() const { return level_; }
  const T& slope() const { return slope_; }
  const std::vector<double>& states() const { return states_; }
  const std::vector<T>& table() const { return table_; }
  /// A representative value (for shapes and zero checks).
  const T& sample() const { return level_; }

  bool is_constant() const { return kind_ == Kind::constant; }

 private:
  std::size_t lookup(double x) const {
    auto it = std::lower_bound(states_.begin(), states_.end(), x);
    const double tol = 1e-9 * std::max(1.0, std::abs(x));
    if (it != states_.end() && std::abs(*it - x) <= tol) return static_cast<std::size_t>(it - states_.begin());
    if (it != states_.begin() && std::abs(*(it - 1) - x) <= tol) {
      return static_cast<std::size_t>(it - states_.begin() - 1);
    }
    throw StructuralError("modulator state " + std::to_string(x) + " is not a tabulated chain state");
  }

  Kind kind_ = Kind::constant;
  T level_{};
  T slope_{};
  std::vector<double> states_;
  std::vector<T> table_;
  std::function<T(double)> fn_;
};

using ScalarField = XField<double>;
using VectorField = XField<Vec>;
using MatrixField = XField<Mat>;

struct Tolerance {
  double abs = 1e-12;
  double rel = 1e-10;
};

}  // namespace modaff
