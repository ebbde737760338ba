#pragma once

// The exogenous process X: a finite-state chain or a 1-D diffusion.

#include "modaff/core.hpp"
#include "modaff/rng.hpp"

#include <limits>
#include <optional>

namespace modaff {

struct FiniteChainModulator {
  std::vector<double> states;        // numeric labels x_1..x_d
  std::vector<std::string> labels;   // display names (may be empty)
  Mat Q;                             // generator, rows sum to 0

  int size() const { return static_cast<int>(states.size()); }
  /// Index of the state with numeric label x; throws StructuralError otherwise.
  int index_of(double x) const;
};

enum class BoundaryKind { unattainable, clamp };

struct Diffusion1DModulator {
  std::string kind = "custom";     // jacobi | brownian | custom
  double lo = 0.0;
  double hi = 1.0;                 // may be +-infinity
  std::function<double(double)> drift;
  std::function<double(double)> diffusion;   // sigma(x) >= 0
  BoundaryKind lo_boundary = BoundaryKind::clamp;
  BoundaryKind hi_boundary = BoundaryKind::clamp;
  std::vector<std::pair<std::string, double>> params;   // for manifests and scenario round trips

  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

using Modulator = std::variant<FiniteChainModulator, Diffusion1DModulator>;

/// Validates Q (square, nonnegative off-diagonal, zero row sums).
FiniteChainModulator make_chain(std::vector<double> states, Mat Q, std::vector<std::string> labels = {});

/// Drift -kappa (x - theta), diffusion sigma sqrt(x (1 - x)) on [0, 1].
Diffusion1DModulator make_jacobi(double kappa, double theta, double sigma);

/// Drift mu, diffusion sigma on the real line (sigma = sqrt 2 gives generator d^2/dx^2).
Diffusion1DModulator make_brownian(double mu, double sigma);

/// States at which coefficient fields are probed for admissibility.
std::vector<double> probe_states(const Modulator& mod, int diffusion_points = 16);

/// Uniform mesh x_j = lo + j h, j = 0..nx.
struct Grid1D {
  double lo = 0.0;
  double hi = 1.0;
  int nx = 64;     // number of intervals
  bool truncated = false;   // far field cut from an unbounded domain

  double h() const { return (hi - lo) / nx; }
  double x(int j) const { return j == nx ? hi : lo + j * h(); }
  int nodes() const { return nx + 1; }
};

/// Mesh for a diffusion modulator. Unbounded sides are truncated at
/// center +- (radius + 5.73 sigma_max sqrt(T)), so the mass that leaves the mesh
/// over the horizon is below 1e-8.
Grid1D make_grid(const Diffusion1DModulator& mod, int nx, double T, double center = 0.0, double radius = 1.0);

/// Tridiagonal stencil of the generator with one extra entry in the first and
/// last rows (second-order one-sided first derivative at degenerate ends).
/// Row j reads  lower[j] f[j-1] + diag[j] f[j] + upper[j] f[j+1]
/// plus extra_first * f[2] in row 0 and extra_last * f[nx-2] in row nx.
struct GeneratorStencil {
  Vec lower, diag, upper;
  double extra_first = 0.0;
  double extra_last = 0.0;
  double max_peclet = 0.0;   // max |mu| h / sigma^2 over interior nodes with sigma > 0
};

GeneratorStencil build_stencil(const Diffusion1DModulator& mod, const Grid1D& grid);

Vec apply_generator(const FiniteChainModulator& mod, const Vec& f);
CVec apply_generator(const FiniteChainModulator& mod, const CVec& f);
Vec apply_generator(const Diffusion1DModulator& mod, const Grid1D& grid, const Vec& f);
CVec apply_stencil(const GeneratorStencil& s, const CVec& f);

/// Chain approximation of a bounded diffusion on the nodes of `grid`: central
/// rates where both are nonnegative, upwind otherwise; boundary nodes with
/// vanishing diffusion move inward at rate max(inward drift, 0) / h.
FiniteChainModulator discretize_to_chain(const Diffusion1DModulator& mod, const Grid1D& grid);

struct ModulatorPath {
  std::vector<double> t;       // reporting grid 0, dt, ..., T
  std::vector<double> x;       // state on the grid
  // Chain paths are exact: switch times and post-switch states.
  bool exact_jumps = false;
  double start = 0.0;
  std::vector<double> switch_t;
  std::vector<double> switch_x;

  /// State at time s (chain: exact; diffusion: value at the last grid node <= s).
  double at(double s) const;
};

/// Chain: Gillespie. Diffusion: Euler-Maruyama with clamp to the domain.
ModulatorPath simulate_modulator(const Modulator& mod, double x0, double T, double dt, RngStream& rng);

/// Grid of k dt up to T, with a final shorter step if T is not a multiple of dt.
std::vector<double> time_grid(double T, double dt);

}  // namespace modaff
