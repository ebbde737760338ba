#pragma once

// Jump measures with computable integrals and samplers.
//
// A JumpMeasure is a finite sum of parts. Each part is one of
//   * FiniteActivityKernel: rate(x) * law of s * direction (compound Poisson)
//   * CgmyKernel:           tempered-stable Levy density on coordinate axes
//   * DiracKernel:          weighted atoms, weights and locations may move with x
//
// "Compensated" integrals follow the generator convention
//   int (e^<u,z> - 1 - <u_K, chi_K(z)>) nu(dz)
// where K is the set of compensated components (J for the level kernel, J(i)
// for the i-th linear kernel).

#include "modaff/core.hpp"
#include "modaff/rng.hpp"

#include <optional>

namespace modaff {

/// Infinite-activity CGMY parts are simulated with jumps |z| >= this cutoff.
inline constexpr double kCgmySmallJumpCutoff = 1e-4;

enum class SizeLaw { normal, exponential };

struct FiniteActivityKernel {
  ScalarField rate;          // jumps per unit time at modulator state x
  Vec direction;             // jump = s * direction
  SizeLaw law = SizeLaw::normal;
  double loc = 0.0;          // normal: mean of s
  double scale = 1.0;        // normal: sd of s; exponential: mean of s (s > 0)
};

struct CgmyComponent {
  int index = 0;             // coordinate that jumps
  double C = 1.0;
  ScalarField G;             // negative-side decay
  ScalarField M;             // positive-side decay
  double Y = 0.5;            // activity index, < 2
};

struct CgmyKernel {
  std::vector<CgmyComponent> components;
};

struct DiracAtom {
  ScalarField weight;
  VectorField location;
};

struct DiracKernel {
  std::vector<DiracAtom> atoms;
};

using JumpPart = std::variant<FiniteActivityKernel, CgmyKernel, DiracKernel>;

/// Boolean component mask (e.g. the compensated set K).
using IndexMask = std::vector<bool>;

struct JumpMeasure {
  std::vector<JumpPart> parts;

  bool empty() const { return parts.empty(); }

  static JumpMeasure none() { return {}; }
  static JumpMeasure dirac(Vec location, double weight = 1.0);
};

/// int (e^<u,z> - 1 - <u_K, chi_K(z)>) nu(x, dz). CGMY parts use the closed
/// form, finite-activity parts adaptive Gauss-Kronrod (abs 1e-10, rel 1e-8).
/// Throws MomentConditionError when Re u leaves the exponential-moment strip.
Complex compensated_integral(const JumpMeasure& nu, double x, const CVec& u, const IndexMask& compensated);

/// Closed form of int_0^inf (e^{wz} - 1 - w chi(z)) z^{-1-Y} e^{-Mz} dz.
/// Requires M > 0, Re w < M, Y < 2.
Complex cgmy_side_integral(Complex w, double M, double Y);

/// Upper incomplete gamma Gamma(s, x) for any real s and x > 0.
double upper_incomplete_gamma(double s, double x);

struct MassCheck {
  double mass = 0.0;           // int (<chi_lin(z),1> + |chi_sq(z)|^2) nu(x,dz)
  bool support_ok = true;      // jumps keep the I-components nonnegative
  std::string detail;
};

/// The admissibility quantity M(x) (or script-M_i) with `linear` the indices
/// entering through chi and `squared` the indices entering through |chi|^2.
MassCheck admissibility_mass(const JumpMeasure& nu, double x, const IndexMask& linear,
                             const IndexMask& squared, const IndexMask& nonnegative);

/// int chi_k(z) nu(x,dz); throws MomentConditionError if it diverges.
double truncated_mean(const JumpMeasure& nu, double x, int k);

/// Is int_{|z|>1} |z_k|^power e^{<v,z>} nu(x,dz) finite for real v?
/// `power` is 0 or 1 and `k` is ignored for power 0.
bool exponential_tail_finite(const JumpMeasure& nu, double x, const Vec& v, int power = 0, int k = 0);

// ---------------------------------------------------------------------------
// Simulation view. Infinite-activity CGMY parts are truncated at
// kCgmySmallJumpCutoff; everything else is simulated exactly.

/// Total rate of simulated jumps at state x.
double simulated_rate(const JumpMeasure& nu, double x);

/// int chi(z) over the simulated jumps (drift compensation).
Vec simulated_truncated_mean(const JumpMeasure& nu, double x, int n);

/// Draw one jump from the normalised simulated measure.
Vec sample_jump(const JumpMeasure& nu, double x, int n, RngStream& rng);

/// Throws RefusalError naming the first part without a sampler.
void require_sampler(const JumpMeasure& nu, const std::string& label);

}  // namespace modaff
