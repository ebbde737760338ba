#pragma once

// The full transform E_z[e^{<u, Y_t>} e^{q X_t} exp(int_0^t (l + <lambda, Y_s>) ds)]
// = phi(t, x; u) e^{<psi(t, u), y>}.

#include "modaff/cauchy.hpp"

#include <mutex>
#include <optional>

namespace modaff {

struct TransformQuery {
  CVec u;
  double T = 1.0;
  double x = 0.0;
  Vec y;
  std::optional<DiscountSpec> discount;
  Complex q = 0.0;
};

struct TransformNumerics {
  RiccatiOptions riccati;
  ChainCauchyOptions chain;
  PdeGrid pde_grid;
  PdeCauchyOptions pde;
  /// Diffusion modulators use the PDE solver unless this is set.
  bool feynman_kac = false;
  FeynmanKacOptions fk;
};

struct TransformResult {
  Complex value = 0.0;
  Complex phi = 0.0;
  CVec psi;
  std::string method;
  double error_estimate = 0.0;
  std::map<std::string, double> metadata;
  std::vector<std::string> warnings;
};

/// Shares Riccati solutions between queries with the same (u, discount).
/// A stored path is reused for any horizon it covers.
class RiccatiCache {
 public:
  std::shared_ptr<const RiccatiPath> get(const XAdmissibleParams& p, const CVec& u, const DiscountSpec& d, double T,
                                         const RiccatiOptions& opt);
  std::size_t size() const;
  std::size_t hits() const { return hits_; }

 private:
  mutable std::mutex mu_;
  std::map<std::vector<double>, std::shared_ptr<const RiccatiPath>> paths_;
  std::size_t hits_ = 0;
};

TransformResult transform(const XAdmissibleParams& p, const Modulator& mod, const TransformQuery& q,
                          const TransformNumerics& num = {}, RiccatiCache* cache = nullptr);

/// Assemble phi * e^{<psi, y>} from an existing Riccati path.
TransformResult transform_with_path(const XAdmissibleParams& p, const Modulator& mod,
                                    std::shared_ptr<const RiccatiPath> rp, const TransformQuery& q,
                                    const TransformNumerics& num = {});

/// Real exponential moment E_z[e^{<u, Y_t>}]. Refuses killing parameters and
/// probes the jump integrability conditions along the real Riccati solution.
TransformResult exp_moment(const XAdmissibleParams& p, const Modulator& mod, const Vec& u, const TransformQuery& q,
                           const TransformNumerics& num = {});

/// Evaluates transform(u) for each u (other query fields shared); results are
/// in input order and independent of the thread count.
std::vector<TransformResult> transform_batch(const XAdmissibleParams& p, const Modulator& mod,
                                             const std::vector<CVec>& us, const TransformQuery& base,
                                             const TransformNumerics& num = {}, int threads = 1);

/// CSV: re_u1..re_un, im_u1..im_un, re, im, err
void write_transform_csv(const std::vector<CVec>& us, const std::vector<TransformResult>& results,
                         const std::string& path);

}  // namespace modaff
