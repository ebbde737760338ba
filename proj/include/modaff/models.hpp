#pragma once

// Built-in model library. Every builder takes named numeric parameters; any
// parameter not given keeps its default. Built models are validated.

#include "modaff/modulator.hpp"
#include "modaff/params.hpp"
#include "modaff/riccati.hpp"

#include <map>

namespace modaff {

using ParamMap = std::map<std::string, double>;

struct ModelSpec {
  std::string name;
  XAdmissibleParams params;
  Modulator modulator;
  double x0 = 0.0;
  Vec y0;
  /// Discount used by default for priced instruments (may be zero).
  DiscountSpec discount;
  std::vector<std::string> instruments;
  std::vector<std::string> component_names;
  ParamMap settings;   // the resolved parameter values

  int n() const { return params.shape.n; }
  int index_of(const std::string& component) const;
};

std::vector<std::string> builtin_model_names();
ParamMap builtin_defaults(const std::string& name);

/// Throws StructuralError for unknown names or parameters and
/// AdmissibilityError when the result fails validation.
ModelSpec build_model(const std::string& name, const ParamMap& overrides = {});

/// Y = (r, gamma, v, p): CIR short rate, CIR hazard rate, Heston variance and
/// log price, levels driven by a Jacobi process X.
ModelSpec make_jacobi_heston_credit(const ParamMap& overrides = {});
/// CIR short rate whose mean level switches with a 2-state chain.
ModelSpec make_regime_cir(const ParamMap& overrides = {});
/// Log price with CGMY jumps and diffusion whose parameters switch with a 2-state chain.
ModelSpec make_mm_cgmy(const ParamMap& overrides = {});
/// Self-exciting counting process Y = (N, lambda) with regime-dependent baseline.
ModelSpec make_mm_hawkes(const ParamMap& overrides = {});
/// n = 1, m = 0, X Brownian with generator d^2/dx^2, a(x) = 1{x >= 0}/2 and
/// m(x, dz) = 1{x < 0} x^-2 delta_x(dz).
ModelSpec make_perturbed_heat(const ParamMap& overrides = {});

/// Validate against the model's modulator probe states; throws AdmissibilityError.
void require_admissible(const ModelSpec& model);

}  // namespace modaff
