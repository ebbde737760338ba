#pragma once

// Solvers for the Cauchy problem
//   d/dt phi = A^X phi + (F(x, psi(t,u)) + l) phi,   phi(0, x) = e^{q x}
// where psi is a stored Riccati path and l its discount constant.

#include "modaff/modulator.hpp"
#include "modaff/riccati.hpp"

#include <map>
#include <memory>

namespace modaff {

enum class CauchyMethod { ode, pde, feynman_kac };
std::string to_string(CauchyMethod m);

struct CauchySolution {
  ComplexDomainPoint u0;
  std::shared_ptr<const RiccatiPath> riccati;
  CauchyMethod method = CauchyMethod::ode;
  std::vector<double> times;
  std::vector<double> states;       // chain states or mesh nodes (or start points for Feynman-Kac)
  CMat values;                      // times x states
  Mat stderr_;                      // same shape, Feynman-Kac only
  double error_estimate = 0.0;
  std::map<std::string, double> metadata;
  std::vector<std::string> warnings;

  /// phi at the last time and state x (linear interpolation between mesh nodes).
  Complex at_end(double x) const { return at(times.size() - 1, x); }
  Complex at(std::size_t time_index, double x) const;
  double stderr_at_end(double x) const;
};

struct ChainCauchyOptions {
  Tolerance tol;
  Complex q = 0.0;                  // initial datum e^{q x}
  std::vector<double> output_times; // extra times to land on; accepted steps are always stored
};

CauchySolution solve_cauchy_chain(const XAdmissibleParams& p, const FiniteChainModulator& mod,
                                  std::shared_ptr<const RiccatiPath> rp, double T, const ChainCauchyOptions& opt = {});

struct PdeGrid {
  int nx = 200;
  int nt = 200;
  double center = 0.0;   // truncation window for unbounded domains
  double radius = 1.0;
};

struct PdeCauchyOptions {
  Complex q = 0.0;
  int rannacher_half_steps = 4;
  /// Refuse when dt * sup |F| exceeds this (reaction under-resolved in time).
  double max_reaction_step = 0.5;
};

CauchySolution solve_cauchy_pde(const XAdmissibleParams& p, const Diffusion1DModulator& mod,
                                std::shared_ptr<const RiccatiPath> rp, double T, const PdeGrid& grid,
                                const PdeCauchyOptions& opt = {});

struct FeynmanKacOptions {
  std::size_t n_paths = 10000;
  double dt = 1.0 / 1024;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<double> start_states;   // default: the modulator's probe states
  std::vector<double> times;          // default: {T}
  Complex q = 0.0;
};

/// Monte Carlo estimate of E_x[exp(int_0^t (F(X_s, psi(t - s)) + l) ds) e^{q X_t}].
CauchySolution solve_cauchy_feynman_kac(const XAdmissibleParams& p, const Modulator& mod,
                                        std::shared_ptr<const RiccatiPath> rp, double T,
                                        const FeynmanKacOptions& opt);

/// Reaction F(x, psi) + l, with a fast path when the parameters are affine in x
/// and carry no x-dependent jumps.
class Reaction {
 public:
  Reaction(const XAdmissibleParams& p, double l);
  Complex operator()(double x, const CVec& psi) const;
  /// F(x, psi) = level + x * slope when affine_in_x().
  bool affine_in_x() const { return affine_; }
  std::pair<Complex, Complex> affine_parts(const CVec& psi) const;

 private:
  const XAdmissibleParams* p_;
  double l_;
  bool affine_;
};

/// CSV: t,x,re,im,stderr
void write_cauchy_csv(const CauchySolution& sol, const std::string& path);

}  // namespace modaff
