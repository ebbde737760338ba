#pragma once

// Path simulation of (X, Y) from the semimartingale characteristics:
// full-truncation Euler for the continuous part, thinning for jumps.

#include "modaff/modulator.hpp"
#include "modaff/riccati.hpp"

#include <map>
#include <optional>

namespace modaff {

/// Characteristics of Y at (x, y) with respect to the clamp truncation chi.
struct Characteristics {
  Vec drift;            // b~(x) + beta~ y+
  Mat diffusion;        // 2 (a(x) + sum_i alpha_i y_i+)
  double jump_rate = 0.0;   // total mass of m(x,.) + sum_i y_i+ mu_i (CGMY parts truncated at the sampler cutoff)
  Vec jump_chi_mean;        // int chi(z) over the same measure
};

/// Refuses (RefusalError) unless c == 0 and gamma == 0.
Characteristics characteristics_at(const XAdmissibleParams& p, double x, const Vec& y);

struct SimulationOptions {
  double dt = 1.0 / 1024;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Spacing of the stored grid (0: store only t = 0 and t = T).
  double report_dt = 0.0;
  /// Track int_0^t (l + <lambda, Y_s>) ds along each path.
  std::optional<DiscountSpec> discount;
  /// Component whose positive part is a default intensity (-1: none).
  int default_component = -1;
  double headroom = 1.2;
  double guard = 1e12;
};

struct PathBundle {
  std::vector<double> times;
  int n = 0;
  std::size_t n_paths = 0;
  std::vector<double> x;                 // [path][time]
  std::vector<double> y;                 // [path][time][component], I-components as max(y, 0)
  std::vector<double> discount;          // [path][time] when tracked
  std::vector<double> default_time;      // per path, +inf if no default by T
  std::vector<std::uint64_t> stream_ids;
  std::vector<char> aborted;             // guard exceeded
  std::map<std::string, double> metadata;

  double X(std::size_t path, std::size_t k) const { return x[path * times.size() + k]; }
  Eigen::Map<const Vec> Y(std::size_t path, std::size_t k) const {
    return Eigen::Map<const Vec>(y.data() + (path * times.size() + k) * static_cast<std::size_t>(n), n);
  }
  double discount_integral(std::size_t path, std::size_t k) const { return discount[path * times.size() + k]; }
  std::size_t last() const { return times.size() - 1; }
};

PathBundle simulate_paths(const XAdmissibleParams& p, const Modulator& mod, double x0, const Vec& y0, double T,
                          const SimulationOptions& opt);

struct EmpiricalEstimate {
  Complex mean = 0.0;
  double stderr_ = 0.0;
};

struct EmpiricalOptions {
  std::optional<std::size_t> time_index;   // default: last
  bool discounted = false;                 // multiply by exp(discount integral)
  bool survival = false;                   // multiply by 1{default_time > t}
};

/// Sample mean and standard error of e^{<u, Y_t>} over the non-aborted paths.
EmpiricalEstimate empirical_transform(const PathBundle& b, const CVec& u, const EmpiricalOptions& opt = {});

/// CSV: path,t,x,y1..yn
void write_paths_csv(const PathBundle& b, const std::string& path, std::size_t max_paths = 0);
/// CSV: t,component,mean,sd,min,max
void write_summary_csv(const PathBundle& b, const std::string& path);

}  // namespace modaff
