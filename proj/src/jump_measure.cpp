#include "modaff/jump_measure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <limits>
#include <numbers>

namespace modaff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuadRel = 1e-8;
constexpr double kQuadAbs = 1e-10;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool masked(const IndexMask& mask, int k) { return k < static_cast<int>(mask.size()) && mask[k]; }

double size_density(const FiniteActivityKernel& k, double s) {
  if (k.law == SizeLaw::normal) {
    const double z = (s - k.loc) / k.scale;
    return std::exp(-0.5 * z * z) / (k.scale * std::sqrt(2.0 * std::numbers::pi));
  }
  return s < 0.0 ? 0.0 : std::exp(-s / k.scale) / k.scale;
}

/// Integration limits of the size law with breakpoints at the kinks of chi.
std::vector<double> size_breakpoints(const FiniteActivityKernel& k) {
  std::vector<double> pts;
  const double lo = k.law == SizeLaw::normal ? -kInf : 0.0;
  pts.push_back(lo);
  for (int c = 0; c < k.direction.size(); ++c) {
    const double d = std::abs(k.direction[c]);
    if (d == 0.0) continue;
    for (double b : {-1.0 / d, 1.0 / d}) {
      if (b > lo) pts.push_back(b);
    }
  }
  if (k.law == SizeLaw::normal) pts.push_back(k.loc);
  pts.push_back(kInf);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

template <class F>
auto integrate_size_law(const FiniteActivityKernel& k, F&& integrand) {
  using R = decltype(integrand(0.0));
  const auto pts = size_breakpoints(k);
  R total{};
  double err_total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double err = 0.0;
    auto f = [&](double s) { return integrand(s) * size_density(k, s); };
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], 15, kQuadRel * 1e-2,
                                                                          &err);
    err_total += err;
  }
  if (!(err_total <= std::max(kQuadAbs, kQuadRel * std::abs(total)))) {
    throw NumericalError("jump-size quadrature did not reach tolerance (error " + std::to_string(err_total) + ")");
  }
  return total;
}

Complex finite_activity_integral(const FiniteActivityKernel& k, double x, const CVec& u, const IndexMask& comp) {
  const double rate = k.rate(x);
  if (rate == 0.0) return 0.0;
  const Complex w = (u.transpose() * k.direction.cast<Complex>())(0);
  if (k.law == SizeLaw::exponential && w.real() >= 1.0 / k.scale) {
    throw MomentConditionError("exponential jump law has no moment at Re<u,d> = " + std::to_string(w.real()));
  }
  auto integrand = [&](double s) {
    Complex v = expm1_minus_linear(s * w);
    for (int c = 0; c < k.direction.size(); ++c) {
      const double zc = s * k.direction[c];
      if (zc == 0.0) continue;
      v += u[c] * (zc - (masked(comp, c) ? truncate(zc) : 0.0));
    }
    return v;
  };
  return rate * integrate_size_law(k, integrand);
}

/// int_0^inf chi(z) z^{-1-Y} e^{-Mz} dz, finite for Y < 1.
double cgmy_side_chi_mean(double M, double Y) {
  if (Y >= 1.0) {
    throw MomentConditionError("CGMY part with Y >= 1 has no finite truncated first moment");
  }
  const double lower = std::tgamma(1.0 - Y) - upper_incomplete_gamma(1.0 - Y, M);
  return std::pow(M, Y - 1.0) * lower + std::pow(M, Y) * upper_incomplete_gamma(-Y, M);
}

/// int_eps^inf chi(z) z^{-1-Y} e^{-Mz} dz.
double cgmy_side_chi_mean_above(double M, double Y, double eps) {
  if (Y < 0.0) return cgmy_side_chi_mean(M, Y);
  return std::pow(M, Y - 1.0) * (upper_incomplete_gamma(1.0 - Y, M * eps) - upper_incomplete_gamma(1.0 - Y, M)) +
         std::pow(M, Y) * upper_incomplete_gamma(-Y, M);
}

/// Mass of the simulated part of one side: z >= eps for Y >= 0, all z for Y < 0.
double cgmy_side_sim_mass(double M, double Y, double eps) {
  // Samplers ask for the same few masses on every draw.
  struct Entry {
    double M, Y, eps, mass;
  };
  thread_local std::array<Entry, 8> memo{};
  thread_local std::size_t next = 0;
  for (const auto& e : memo) {
    if (e.M == M && e.Y == Y && e.eps == eps && e.mass > 0.0) return e.mass;
  }
  const double mass = Y < 0.0 ? std::pow(M, Y) * std::tgamma(-Y) : std::pow(M, Y) * upper_incomplete_gamma(-Y, M * eps);
  memo[next] = {M, Y, eps, mass};
  next = (next + 1) % memo.size();
  return mass;
}

double cgmy_side_magnitude(double lambda, double Y, double eps, RngStream& rng) {
  if (Y < 0.0) return rng.gamma(-Y, lambda);
  // Mixture envelope: z^{-1-Y} e^{-lambda eps} on [eps, 1], e^{-lambda z} on [1, inf).
  const double mass_a = std::exp(-lambda * eps) * (Y == 0.0 ? std::log(1.0 / eps) : (std::pow(eps, -Y) - 1.0) / Y);
  const double mass_b = std::exp(-lambda) / lambda;
  for (;;) {
    if (rng.uniform() * (mass_a + mass_b) < mass_a) {
      const double v = rng.uniform();
      const double z = Y == 0.0 ? std::pow(eps, 1.0 - v)
                                : std::pow(std::pow(eps, -Y) - v * (std::pow(eps, -Y) - 1.0), -1.0 / Y);
      if (rng.uniform() <= std::exp(-lambda * (z - eps))) return z;
    } else {
      const double z = 1.0 + rng.exponential() / lambda;
      if (rng.uniform() <= std::pow(z, -1.0 - Y)) return z;
    }
  }
}

void check_cgmy_component(const CgmyComponent& c, double G, double M) {
  if (!(G > 0.0) || !(M > 0.0) || !(c.Y < 2.0) || !(c.C >= 0.0)) {
    throw MomentConditionError("CGMY component on coordinate " + std::to_string(c.index) +
                               " needs C >= 0, G > 0, M > 0, Y < 2");
  }
}

}  // namespace

JumpMeasure JumpMeasure::dirac(Vec location, double weight) {
  DiracKernel k;
  k.atoms.push_back({ScalarField::constant(weight), VectorField::constant(std::move(location))});
  return JumpMeasure{{k}};
}

double upper_incomplete_gamma(double s, double x) {
  if (s > 0.0) return boost::math::tgamma(s, x);
  if (s == 0.0) return boost::math::expint(1, x);
  return (upper_incomplete_gamma(s + 1.0, x) - std::pow(x, s) * std::exp(-x)) / s;
}

Complex cgmy_side_integral(Complex w, double M, double Y) {
  if (!(M > 0.0) || !(Y < 2.0)) throw MomentConditionError("CGMY side integral needs M > 0 and Y < 2");
  if (!(w.real() < M)) {
    throw MomentConditionError("CGMY exponential moment diverges: Re u = " + std::to_string(w.real()) +
                               " >= decay " + std::to_string(M));
  }
  // Fully compensated part int (e^{wz} - 1 - wz) z^{-1-Y} e^{-Mz} dz ...
  Complex full;
  if (std::abs(Y) < 1e-9) {
    full = -std::log(1.0 - w / M) - w / M;
  } else if (std::abs(Y - 1.0) < 1e-9) {
    full = (M - w) * std::log(1.0 - w / M) + w;
  } else {
    full = std::tgamma(-Y) * (std::pow(Complex(M - w), Y) - std::pow(M, Y)) - w * std::tgamma(1.0 - Y) * std::pow(M, Y - 1.0);
  }
  // ... plus w int_1^inf (z - 1) z^{-1-Y} e^{-Mz} dz for chi(z) = min(z, 1).
  const double tail = std::pow(M, Y - 1.0) * upper_incomplete_gamma(1.0 - Y, M) - std::pow(M, Y) * upper_incomplete_gamma(-Y, M);
  return full + w * tail;
}

Complex compensated_integral(const JumpMeasure& nu, double x, const CVec& u, const IndexMask& compensated) {
  Complex total = 0.0;
  for (const auto& part : nu.parts) {
    total += std::visit(
        Overloaded{
            [&](const FiniteActivityKernel& k) { return finite_activity_integral(k, x, u, compensated); },
            [&](const CgmyKernel& k) {
              Complex s = 0.0;
              for (const auto& c : k.components) {
                const double G = c.G(x);
                const double M = c.M(x);
                check_cgmy_component(c, G, M);
                const Complex w = u[c.index];
                Complex pos = cgmy_side_integral(w, M, c.Y);
                Complex neg = cgmy_side_integral(-w, G, c.Y);
                if (!masked(compensated, c.index)) {
                  pos += w * cgmy_side_chi_mean(M, c.Y);
                  neg -= w * cgmy_side_chi_mean(G, c.Y);
                }
                s += c.C * (pos + neg);
              }
              return s;
            },
            [&](const DiracKernel& k) {
              Complex s = 0.0;
              for (const auto& a : k.atoms) {
                const double wgt = a.weight(x);
                if (wgt == 0.0) continue;
                const Vec loc = a.location(x);
                Complex v = expm1_minus_linear((u.transpose() * loc.cast<Complex>())(0));
                for (int c = 0; c < loc.size(); ++c) {
                  if (loc[c] == 0.0) continue;
                  v += u[c] * (loc[c] - (masked(compensated, c) ? truncate(loc[c]) : 0.0));
                }
                s += wgt * v;
              }
              return s;
            }},
        part);
  }
  return total;
}

MassCheck admissibility_mass(const JumpMeasure& nu, double x, const IndexMask& linear, const IndexMask& squared,
                             const IndexMask& nonnegative) {
  MassCheck out;
  auto fail = [&](const std::string& why) {
    out.support_ok = false;
    if (out.detail.empty()) out.detail = why;
  };
  for (const auto& part : nu.parts) {
    std::visit(
        Overloaded{
            [&](const FiniteActivityKernel& k) {
              const double rate = k.rate(x);
              if (!(rate >= 0.0) || !std::isfinite(rate)) fail("finite-activity rate is negative or not finite");
              if (!(k.scale > 0.0)) fail("finite-activity size scale must be positive");
              for (int c = 0; c < k.direction.size(); ++c) {
                if (!masked(nonnegative, c) || k.direction[c] == 0.0) continue;
                if (k.law == SizeLaw::normal || k.direction[c] < 0.0) {
                  fail("finite-activity jumps can make component " + std::to_string(c) + " negative");
                }
              }
              if (!out.support_ok || rate == 0.0) return;
              out.mass += rate * integrate_size_law(k, [&](double s) {
                double v = 0.0;
                for (int c = 0; c < k.direction.size(); ++c) {
                  const double zc = truncate(s * k.direction[c]);
                  if (masked(linear, c)) v += zc;
                  if (masked(squared, c)) v += zc * zc;
                }
                return v;
              });
            },
            [&](const CgmyKernel& k) {
              for (const auto& c : k.components) {
                const double G = c.G(x);
                const double M = c.M(x);
                if (masked(nonnegative, c.index)) {
                  fail("two-sided CGMY jumps on nonnegative component " + std::to_string(c.index));
                  continue;
                }
                if (!(G > 0.0) || !(M > 0.0) || !(c.C >= 0.0) || !(c.Y < 2.0)) {
                  fail("CGMY component " + std::to_string(c.index) + " needs C >= 0, G > 0, M > 0, Y < 2");
                  continue;
                }
                auto sq = [&](double lam) {
                  const double lower = std::tgamma(2.0 - c.Y) - upper_incomplete_gamma(2.0 - c.Y, lam);
                  return std::pow(lam, c.Y - 2.0) * lower + std::pow(lam, c.Y) * upper_incomplete_gamma(-c.Y, lam);
                };
                if (masked(squared, c.index)) out.mass += c.C * (sq(M) + sq(G));
                if (masked(linear, c.index)) {
                  if (c.Y >= 1.0) {
                    out.mass = kInf;
                  } else {
                    out.mass += c.C * (cgmy_side_chi_mean(M, c.Y) - cgmy_side_chi_mean(G, c.Y));
                  }
                }
              }
            },
            [&](const DiracKernel& k) {
              for (const auto& a : k.atoms) {
                const double wgt = a.weight(x);
                if (!(wgt >= 0.0) || !std::isfinite(wgt)) fail("Dirac weight is negative or not finite");
                if (wgt == 0.0) continue;
                const Vec loc = a.location(x);
                if (loc.isZero(0.0)) fail("Dirac atom located at the origin");
                double v = 0.0;
                for (int c = 0; c < loc.size(); ++c) {
                  if (masked(nonnegative, c) && loc[c] < 0.0) {
                    fail("Dirac atom makes component " + std::to_string(c) + " negative");
                  }
                  const double zc = truncate(loc[c]);
                  if (masked(linear, c)) v += zc;
                  if (masked(squared, c)) v += zc * zc;
                }
                out.mass += wgt * v;
              }
            }},
        part);
  }
  return out;
}

double truncated_mean(const JumpMeasure& nu, double x, int k) {
  double total = 0.0;
  for (const auto& part : nu.parts) {
    total += std::visit(Overloaded{[&](const FiniteActivityKernel& f) {
                                     const double rate = f.rate(x);
                                     if (rate == 0.0 || f.direction[k] == 0.0) return 0.0;
                                     return rate * integrate_size_law(
                                                       f, [&](double s) { return truncate(s * f.direction[k]); });
                                   },
                                   [&](const CgmyKernel& c) {
                                     double s = 0.0;
                                     for (const auto& comp : c.components) {
                                       if (comp.index != k) continue;
                                       s += comp.C * (cgmy_side_chi_mean(comp.M(x), comp.Y) -
                                                      cgmy_side_chi_mean(comp.G(x), comp.Y));
                                     }
                                     return s;
                                   },
                                   [&](const DiracKernel& d) {
                                     double s = 0.0;
                                     for (const auto& a : d.atoms) {
                                       const double wgt = a.weight(x);
                                       if (wgt != 0.0) s += wgt * truncate(a.location(x)[k]);
                                     }
                                     return s;
                                   }},
                        part);
  }
  return total;
}

bool exponential_tail_finite(const JumpMeasure& nu, double x, const Vec& v, int power, int k) {
  (void)k;
  for (const auto& part : nu.parts) {
    const bool ok = std::visit(
        Overloaded{[&](const FiniteActivityKernel& f) {
                     if (f.law == SizeLaw::normal || f.rate(x) == 0.0) return true;
                     return v.dot(f.direction) < 1.0 / f.scale;
                   },
                   [&](const CgmyKernel& c) {
                     for (const auto& comp : c.components) {
                       const double w = v[comp.index];
                       const double G = comp.G(x);
                       const double M = comp.M(x);
                       // On the boundary the polynomial factor decides.
                       if (w > M || w < -G) return false;
                       if ((w == M || w == -G) && !(comp.Y > power)) return false;
                     }
                     return true;
                   },
                   [&](const DiracKernel&) { return true; }},
        part);
    if (!ok) return false;
  }
  return true;
}

double simulated_rate(const JumpMeasure& nu, double x) {
  double total = 0.0;
  for (const auto& part : nu.parts) {
    total += std::visit(Overloaded{[&](const FiniteActivityKernel& f) { return f.rate(x); },
                                   [&](const CgmyKernel& c) {
                                     double s = 0.0;
                                     for (const auto& comp : c.components) {
                                       check_cgmy_component(comp, comp.G(x), comp.M(x));
                                       s += comp.C * (cgmy_side_sim_mass(comp.M(x), comp.Y, kCgmySmallJumpCutoff) +
                                                      cgmy_side_sim_mass(comp.G(x), comp.Y, kCgmySmallJumpCutoff));
                                     }
                                     return s;
                                   },
                                   [&](const DiracKernel& d) {
                                     double s = 0.0;
                                     for (const auto& a : d.atoms) s += a.weight(x);
                                     return s;
                                   }},
                        part);
  }
  return total;
}

Vec simulated_truncated_mean(const JumpMeasure& nu, double x, int n) {
  Vec out = Vec::Zero(n);
  for (const auto& part : nu.parts) {
    std::visit(Overloaded{[&](const FiniteActivityKernel& f) {
                            for (int k = 0; k < n; ++k) {
                              if (f.direction[k] != 0.0) {
                                JumpMeasure single{{f}};
                                out[k] += truncated_mean(single, x, k);
                              }
                            }
                          },
                          [&](const CgmyKernel& c) {
                            for (const auto& comp : c.components) {
                              out[comp.index] +=
                                  comp.C * (cgmy_side_chi_mean_above(comp.M(x), comp.Y, kCgmySmallJumpCutoff) -
                                            cgmy_side_chi_mean_above(comp.G(x), comp.Y, kCgmySmallJumpCutoff));
                            }
                          },
                          [&](const DiracKernel& d) {
                            for (const auto& a : d.atoms) {
                              const double wgt = a.weight(x);
                              if (wgt != 0.0) out += wgt * truncate(a.location(x));
                            }
                          }},
               part);
  }
  return out;
}

Vec sample_jump(const JumpMeasure& nu, double x, int n, RngStream& rng) {
  const double total = simulated_rate(nu, x);
  double pick = rng.uniform() * total;
  const JumpPart* chosen = &nu.parts.back();
  for (const auto& part : nu.parts) {
    const double r = simulated_rate(JumpMeasure{{part}}, x);
    if (pick < r) {
      chosen = &part;
      break;
    }
    pick -= r;
  }
  return std::visit(
      Overloaded{[&](const FiniteActivityKernel& f) -> Vec {
                   const double s =
                       f.law == SizeLaw::normal ? f.loc + f.scale * rng.normal() : f.scale * rng.exponential();
                   return s * f.direction;
                 },
                 [&](const CgmyKernel& c) -> Vec {
                   std::vector<double> masses;
                   for (const auto& comp : c.components) {
                     masses.push_back(comp.C * cgmy_side_sim_mass(comp.M(x), comp.Y, kCgmySmallJumpCutoff));
                     masses.push_back(comp.C * cgmy_side_sim_mass(comp.G(x), comp.Y, kCgmySmallJumpCutoff));
                   }
                   double tot = 0.0;
                   for (double m : masses) tot += m;
                   double r = rng.uniform() * tot;
                   std::size_t j = 0;
                   while (j + 1 < masses.size() && r >= masses[j]) r -= masses[j++];
                   const auto& comp = c.components[j / 2];
                   const bool positive = (j % 2) == 0;
                   const double lambda = positive ? comp.M(x) : comp.G(x);
                   Vec z = Vec::Zero(n);
                   const double mag = cgmy_side_magnitude(lambda, comp.Y, kCgmySmallJumpCutoff, rng);
                   z[comp.index] = positive ? mag : -mag;
                   return z;
                 },
                 [&](const DiracKernel& d) -> Vec {
                   double tot = 0.0;
                   for (const auto& a : d.atoms) tot += a.weight(x);
                   double r = rng.uniform() * tot;
                   for (const auto& a : d.atoms) {
                     const double w = a.weight(x);
                     if (r < w) return a.location(x);
                     r -= w;
                   }
                   return d.atoms.back().location(x);
                 }},
      *chosen);
}

void require_sampler(const JumpMeasure& nu, const std::string& label) {
  for (const auto& part : nu.parts) {
    if (const auto* c = std::get_if<CgmyKernel>(&part)) {
      for (const auto& comp : c->components) {
        if (!(comp.Y < 2.0)) {
          throw RefusalError(label + ": CGMY component on coordinate " + std::to_string(comp.index) +
                             " has no sampler (Y >= 2)");
        }
      }
    }
  }
}

}  // namespace modaff
