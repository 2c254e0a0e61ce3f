#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "special.hpp"
#include "types.hpp"

namespace cdl {

/// Eigenvalue sequence of a reversible Markov kernel on the Beta law;
/// values[0] must be 1.
struct correlation_sequence {
  enum class origin_tag { mixing, spectrum, subordinated, user };
  std::vector<double> values;
  origin_tag origin = origin_tag::user;
};

/// Parameter region in which positive-definite sequences are exactly the
/// mixtures rho_n = E[R_n(Z)]: alpha < beta and (alpha >= 1/2 or theta >= 2).
inline bool gasper_domain(const model_params& p) {
  p.require_stationary();
  return p.alpha < p.beta && (p.alpha >= 0.5 || p.theta() >= 2.0);
}

/// Mixture sequence rho_n = E[R_n(Z)] for a probability law Z on [0,1].
inline correlation_sequence rho_from_mixing(int nmax, const discrete_measure& zlaw,
                                            const model_params& p) {
  if (!zlaw.is_probability())
    throw domain_error("rho_from_mixing: Z law must be a probability measure");
  correlation_sequence out;
  out.origin = correlation_sequence::origin_tag::mixing;
  out.values.assign(static_cast<std::size_t>(nmax) + 1, 0.0);
  for (std::size_t i = 0; i < zlaw.size(); ++i) {
    auto r = jacobi_r_all(nmax, p, zlaw.atoms[i]);
    for (int n = 0; n <= nmax; ++n) out.values[n] += zlaw.masses[i] * r[n];
  }
  out.values[0] = 1.0;
  return out;
}

/// Bivariate correlation-sequence density relative to the product of the
/// marginals: 1 + sum smoothing^n rho_n h_n R_n(x) R_n(y). Used for
/// positive-definiteness grid scans. Sequences without decay in n give a
/// distributional density whose truncations oscillate; damping by
/// smoothing^n (a correlation sequence itself) preserves positivity of
/// genuine correlation sequences while making the scan convergent.
inline double bivariate_ratio(const correlation_sequence& rho, const model_params& p,
                              double x, double y, double smoothing = 1.0) {
  int nmax = static_cast<int>(rho.values.size()) - 1;
  auto rx = jacobi_r_all(nmax, p, x);
  auto ry = jacobi_r_all(nmax, p, y);
  kahan_accumulator acc;
  acc.add(1.0);
  double sn = 1.0;
  for (int n = 1; n <= nmax; ++n) {
    sn *= smoothing;
    acc.add(sn * rho.values[n] * h_norm(n, p) * rx[n] * ry[n]);
  }
  return acc.sum();
}

/// Damping factor s for grid scans of length-limited sequences: chosen so the
/// cut tail s^nmax h_nmax sup|R_nmax|^2 sits below tol, making the truncated
/// damped series trustworthy at the scan tolerance. Damping by s^n is itself
/// a correlation sequence, so it preserves positivity of genuine ones.
inline double scan_smoothing(int nmax, const model_params& p, double tol = 1e-9) {
  double rmax = std::max(1.0, std::abs(jacobi_r(nmax, p, 0.0)));
  double target = tol / std::max(1.0, h_norm(nmax, p) * rmax * rmax);
  if (target >= 1.0) return 1.0;
  return std::min(0.99, std::exp(std::log(target) / nmax));
}

/// Truncated product kernel sum_{n=0}^{N} h_n R_n(x) R_n(y) R_n(z) together
/// with an r-smoothed companion sum_n r^n h_n (...) that converges as a
/// function. The unsmoothed series is a distribution (a delta ridge at
/// z = 1), so only partial sums are meaningful there.
struct kernel_k_result {
  double truncated = 0.0;
  int truncated_terms = 0;
  double smoothed = 0.0;
  int smoothed_terms = 0;
  double r = 0.0;
};

namespace detail {

/// Streams n -> h_n R_n(x) R_n(y) R_n(z) products along the recurrence.
class triple_product_stream {
 public:
  triple_product_stream(double x, double y, double z, const model_params& p)
      : x_(x), y_(y), z_(z), p_(p) {}

  // value for the current n, starting at n = 0; call advance() to move on
  double value() const { return h_ * rx1_ * ry1_ * rz1_; }
  void advance() {
    ++n_;
    double theta = p_.theta();
    if (n_ == 1) {
      rx2_ = ry2_ = rz2_ = 1.0;
      rx1_ = 1.0 - (theta / p_.beta) * (1.0 - x_);
      ry1_ = 1.0 - (theta / p_.beta) * (1.0 - y_);
      rz1_ = 1.0 - (theta / p_.beta) * (1.0 - z_);
      h_ = (theta + 1.0) * p_.beta / p_.alpha;
      return;
    }
    auto s = r_step(n_, p_.alpha, p_.beta);
    auto step = [&](double w, double& r1, double& r2) {
      double r = (s.b0 + s.bu * (2.0 * w - 1.0)) * r1 - s.c * r2;
      r2 = r1;
      r1 = r;
    };
    step(x_, rx1_, rx2_);
    step(y_, ry1_, ry2_);
    step(z_, rz1_, rz2_);
    h_ *= (2.0 * n_ + theta - 1.0) / (2.0 * n_ + theta - 3.0) * (theta + n_ - 2.0) *
          (p_.beta + n_ - 1.0) / ((p_.alpha + n_ - 1.0) * n_);
  }

 private:
  double x_, y_, z_;
  model_params p_;
  int n_ = 0;
  double rx1_ = 1.0, rx2_ = 1.0, ry1_ = 1.0, ry2_ = 1.0, rz1_ = 1.0, rz2_ = 1.0;
  double h_ = 1.0;
};

}  // namespace detail

inline kernel_k_result kernel_k(double x, double y, double z, const model_params& p,
                                const series_control& ctl = {}, double r = 0.99) {
  p.require_stationary();
  ctl.validate();
  if (!(r >= 0.0 && r < 1.0)) throw domain_error("kernel_k: need 0 <= r < 1");
  kernel_k_result out;
  out.r = r;

  // plain partial sum to the requested order
  {
    detail::triple_product_stream s(x, y, z, p);
    kahan_accumulator acc;
    for (int n = 0; n < ctl.max_terms; ++n, s.advance()) {
      acc.add(s.value());
      out.truncated_terms = n + 1;
    }
    out.truncated = acc.sum();
  }

  // geometric damping makes the series a function; resolve it fully
  {
    detail::triple_product_stream s(x, y, z, p);
    kahan_accumulator acc;
    double rn = 1.0;
    int small_run = 0;
    int n_gate = (r == 0.0) ? 1 : static_cast<int>(std::log(1.0 / ctl.tail_tol) /
                                                   std::log(1.0 / r)) + 1;
    const int cap = 200000;
    bool resolved = false;
    for (int n = 0; n < cap; ++n, s.advance()) {
      double term = rn * s.value();
      acc.add(term);
      out.smoothed_terms = n + 1;
      rn *= r;
      if (std::abs(term) < ctl.tail_tol) {
        if (++small_run >= ctl.consecutive_small && n >= n_gate) {
          resolved = true;
          break;
        }
      } else {
        small_run = 0;
      }
    }
    if (!resolved)
      throw truncation_error("kernel_k: smoothed series not resolved");
    out.smoothed = acc.sum();
  }
  return out;
}

/// General reversible spectrum d_n = sigma n(n+theta-1) + integral of
/// (1 - R_n(z)) / (1 - z) against a finite measure nu on [0,1).
inline double spectrum_dn(int n, double sigma, const discrete_measure& nu,
                          const model_params& p) {
  if (n < 0 || sigma < 0.0) throw domain_error("spectrum_dn: bad arguments");
  if (n == 0) return 0.0;
  double theta = p.theta();
  kahan_accumulator acc;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    double z = nu.atoms[i];
    if (!(z >= 0.0 && z < 1.0))
      throw domain_error("spectrum_dn: nu atoms must lie in [0,1)");
    acc.add(nu.masses[i] * (1.0 - jacobi_r(n, p, z)) / (1.0 - z));
  }
  return sigma * n * (n + theta - 1.0) + acc.sum();
}

/// Boundary limit lim_{z->1} (1 - R_n(z))/(1 - z) = R_n'(1) = n(n+theta-1)/beta,
/// evaluated through the derivative of the terminating hypergeometric series
/// at its origin.
inline double dn_atom_limit(int n, const model_params& p) {
  p.require_stationary();
  if (n == 0) return 0.0;
  double theta = p.theta();
  // d/dw 2F1(-n, n+theta-1; beta; w) at w = 0 is (-n)(n+theta-1)/beta; the
  // chain rule in w = 1 - z flips the sign.
  double a = -static_cast<double>(n), b = n + theta - 1.0;
  return -(a * b / p.beta) * hyp2f1_terminating(-(n - 1), b + 1.0, p.beta + 1.0, 0.0);
}

/// Spectrum of the compound-Poisson construction: d_n = lambda * integral of
/// (1 - R_n(z)) against a probability measure mu on [0,1].
inline double poisson_dn(int n, double lambda, const discrete_measure& mu,
                         const model_params& p) {
  if (n < 0 || !(lambda > 0.0)) throw domain_error("poisson_dn: bad arguments");
  if (!mu.is_probability())
    throw domain_error("poisson_dn: mu must be a probability measure");
  if (n == 0) return 0.0;
  kahan_accumulator acc;
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc.add(mu.masses[i] * (1.0 - jacobi_r(n, p, mu.atoms[i])));
  return lambda * acc.sum();
}

/// Consistency report for a candidate spectrum c_n(t): (i) positivity of the
/// reconstructed bivariate density on a grid, (ii) continuity in t by
/// bisected finite differences, (iii) c_n(0) = c_0(t) = 1, (iv) the
/// semigroup identity c_n(s+t) = c_n(s) c_n(t) on grid pairs.
struct bochner_report {
  bool positivity_ok = true;
  bool continuity_ok = true;
  bool boundary_ok = true;
  bool semigroup_ok = true;
  std::string failure;

  bool all_ok() const {
    return positivity_ok && continuity_ok && boundary_ok && semigroup_ok;
  }
};

inline bochner_report bochner_consistency(
    const std::function<correlation_sequence(double)>& c,
    std::span<const double> tgrid, const model_params& p, double tol = 1e-10) {
  bochner_report rep;
  auto note = [&](bool& flag, const std::string& msg) {
    if (flag) rep.failure += (rep.failure.empty() ? "" : "; ") + msg;
    flag = false;
  };

  // (iii) boundary values
  auto c0 = c(0.0);
  for (std::size_t n = 0; n < c0.values.size(); ++n)
    if (std::abs(c0.values[n] - 1.0) > tol) {
      note(rep.boundary_ok, "c_n(0) != 1 at n=" + std::to_string(n));
      break;
    }
  for (double t : tgrid)
    if (std::abs(c(t).values[0] - 1.0) > tol) {
      note(rep.boundary_ok, "c_0(t) != 1 at t=" + std::to_string(t));
      break;
    }

  // (iv) semigroup property on grid pairs
  for (double s : tgrid) {
    for (double t : tgrid) {
      auto cs = c(s), ct = c(t), cst = c(s + t);
      std::size_t nmax = std::min({cs.values.size(), ct.values.size(), cst.values.size()});
      for (std::size_t n = 0; n < nmax; ++n) {
        if (std::abs(cst.values[n] - cs.values[n] * ct.values[n]) > tol) {
          note(rep.semigroup_ok, "semigroup fails at n=" + std::to_string(n) +
                                     ", s=" + std::to_string(s) + ", t=" + std::to_string(t));
          break;
        }
      }
      if (!rep.semigroup_ok) break;
    }
    if (!rep.semigroup_ok) break;
  }

  // (ii) continuity: finite differences must shrink under bisection
  for (std::size_t i = 0; i + 1 < tgrid.size() && rep.continuity_ok; ++i) {
    double a = tgrid[i], b = tgrid[i + 1];
    auto diff = [&](double u, double v) {
      auto cu = c(u), cv = c(v);
      double worst = 0.0;
      std::size_t nmax = std::min(cu.values.size(), cv.values.size());
      for (std::size_t n = 0; n < nmax; ++n)
        worst = std::max(worst, std::abs(cu.values[n] - cv.values[n]));
      return worst;
    };
    double full = diff(a, b);
    if (full < 1e-8) continue;
    double step = b - a;
    double prev = full;
    for (int level = 0; level < 4; ++level) {
      step *= 0.5;
      double half = diff(a, a + step);
      if (half > 0.75 * prev + 1e-12) {
        note(rep.continuity_ok, "finite differences do not contract near t=" +
                                    std::to_string(a));
        break;
      }
      prev = half;
    }
  }

  // (i) positive definiteness through the reconstructed bivariate density,
  // scanned with geometric damping so spectra without decay in n (whose
  // densities are distributions) are still assessable
  int nmax_scan = static_cast<int>(c(tgrid.empty() ? 0.0 : tgrid[0]).values.size()) - 1;
  const double smoothing = scan_smoothing(std::max(nmax_scan, 1), p);
  for (double t : tgrid) {
    auto ct = c(t);
    for (int gx = 1; gx < 21 && rep.positivity_ok; ++gx) {
      for (int gy = 1; gy < 21; ++gy) {
        double x = gx / 21.0, y = gy / 21.0;
        if (bivariate_ratio(ct, p, x, y, smoothing) < -1e-8) {
          note(rep.positivity_ok, "bivariate density negative at t=" + std::to_string(t) +
                                      ", x=" + std::to_string(x) + ", y=" + std::to_string(y));
          break;
        }
      }
    }
    if (!rep.positivity_ok) break;
  }
  return rep;
}

/// Geometric-eigenvalue kernel 1 + sum_{n>=1} r^n h_n R_n(x) R_n(y),
/// nonnegative for all alpha, beta > 0 and 0 <= r < 1.
inline double jacobi_poisson_kernel(double r, double x, double y,
                                    const model_params& p,
                                    const series_control& ctl = {}) {
  p.require_stationary();
  ctl.validate();
  if (!(r >= 0.0 && r < 1.0)) throw domain_error("jacobi_poisson_kernel: need 0 <= r < 1");
  if (r == 0.0) return 1.0;
  double theta = p.theta();
  kahan_accumulator acc;
  acc.add(1.0);
  double rx2 = 1.0, ry2 = 1.0;
  double rx1 = 1.0 - (theta / p.beta) * (1.0 - x);
  double ry1 = 1.0 - (theta / p.beta) * (1.0 - y);
  double h = 0.0, rn = 1.0;
  int small_run = 0;
  int n_gate = static_cast<int>(std::log(1.0 / ctl.tail_tol) / std::log(1.0 / r)) + 1;
  for (int n = 1; n <= ctl.max_terms; ++n) {
    double rx, ry;
    if (n == 1) {
      rx = rx1;
      ry = ry1;
      h = (theta + 1.0) * p.beta / p.alpha;
    } else {
      auto s = detail::r_step(n, p.alpha, p.beta);
      rx = (s.b0 + s.bu * (2.0 * x - 1.0)) * rx1 - s.c * rx2;
      ry = (s.b0 + s.bu * (2.0 * y - 1.0)) * ry1 - s.c * ry2;
      rx2 = rx1; rx1 = rx;
      ry2 = ry1; ry1 = ry;
      h *= (2.0 * n + theta - 1.0) / (2.0 * n + theta - 3.0) * (theta + n - 2.0) *
           (p.beta + n - 1.0) / ((p.alpha + n - 1.0) * n);
    }
    rn *= r;
    double term = rn * h * rx * ry;
    acc.add(term);
    if (std::abs(term) < ctl.tail_tol) {
      if (++small_run >= ctl.consecutive_small && n >= n_gate) return acc.sum();
    } else {
      small_run = 0;
    }
  }
  throw truncation_error("jacobi_poisson_kernel: series not resolved within max_terms");
}

/// Bilinear generating series for classical Jacobi polynomials on [-1,1],
/// evaluated through its double-series (Appell) form. With x = cos 2phi,
/// y = cos 2psi, a = sin(phi)sin(psi), b = cos(phi)cos(psi) and
/// k = (sqrt(r) + 1/sqrt(r))/2:
///   sum_n r^n phi_n P_n(x) P_n(y)
///     = Gamma(a+b+2)(1-r) / (2^{a+b+1} Gamma(a+1)Gamma(b+1)(1+r)^{a+b+2})
///       * F4( (a+b+2)/2, (a+b+3)/2; a+1, b+1; (a/k)^2, (b/k)^2 ).
inline double jacobi_poisson_bilinear(double r, double x_angle, double y_angle,
                                      double a_exp, double b_exp,
                                      const series_control& ctl = {}) {
  ctl.validate();
  if (!(r > 0.0 && r < 1.0)) throw domain_error("jacobi_poisson_bilinear: need 0 < r < 1");
  if (!(a_exp > -1.0 && b_exp > -1.0))
    throw domain_error("jacobi_poisson_bilinear: exponents must exceed -1");
  double ab = a_exp + b_exp;
  double av = std::sin(x_angle) * std::sin(y_angle);
  double bv = std::cos(x_angle) * std::cos(y_angle);
  double kk = 0.5 * (std::sqrt(r) + 1.0 / std::sqrt(r));
  double u = (av / kk) * (av / kk);
  double v = (bv / kk) * (bv / kk);
  double big_a = 0.5 * (ab + 2.0), big_b = 0.5 * (ab + 3.0);

  // diagonal sweep: block s collects all m + n = s (all terms nonnegative)
  kahan_accumulator acc;
  int small_run = 0;
  bool resolved = false;
  int s = 0;
  for (s = 0; s <= ctl.max_terms; ++s) {
    double block = 0.0;
    double lg_ab = log_rising_pos(big_a, s) + log_rising_pos(big_b, s);
    for (int m = 0; m <= s; ++m) {
      int n = s - m;
      if ((u == 0.0 && m > 0) || (v == 0.0 && n > 0)) continue;
      double lg = lg_ab - log_rising_pos(a_exp + 1.0, m) - log_rising_pos(b_exp + 1.0, n) -
                  std::lgamma(m + 1.0) - std::lgamma(n + 1.0);
      if (u > 0.0) lg += m * std::log(u);
      if (v > 0.0) lg += n * std::log(v);
      block += std::exp(lg);
    }
    acc.add(block);
    if (block < ctl.tail_tol * std::max(1.0, acc.sum())) {
      if (++small_run >= ctl.consecutive_small) {
        resolved = true;
        break;
      }
    } else {
      small_run = 0;
    }
  }
  if (!resolved)
    throw truncation_error("jacobi_poisson_bilinear: double series not resolved");
  double pref = std::exp(std::lgamma(ab + 2.0) - std::lgamma(a_exp + 1.0) -
                         std::lgamma(b_exp + 1.0)) *
                (1.0 - r) / (std::pow(2.0, ab + 1.0) * std::pow(1.0 + r, ab + 2.0));
  return pref * acc.sum();
}

/// Single-series side of the bilinear identity (test oracle):
/// sum_n r^n phi_n P_n^(a,b)(x) P_n^(a,b)(y) with
/// phi_n^{-1} = 2^{a+b+1}/(2n+a+b+1) * G(n+a+1)G(n+b+1)/(G(n+1)G(n+a+b+1)).
inline double jacobi_poisson_classical_series(double r, double x, double y,
                                              double a_exp, double b_exp,
                                              int max_terms = 2000,
                                              double tol = 1e-14) {
  kahan_accumulator acc;
  double rn = 1.0;
  int small_run = 0;
  for (int n = 0; n < max_terms; ++n) {
    if (n > 0) rn *= r;
    double lphi = std::log(2.0 * n + a_exp + b_exp + 1.0) -
                  (a_exp + b_exp + 1.0) * std::log(2.0) -
                  (std::lgamma(n + a_exp + 1.0) + std::lgamma(n + b_exp + 1.0) -
                   std::lgamma(n + 1.0) - std::lgamma(n + a_exp + b_exp + 1.0));
    double term = rn * std::exp(lphi) * jacobi_p_classical(n, a_exp, b_exp, x) *
                  jacobi_p_classical(n, a_exp, b_exp, y);
    acc.add(term);
    if (std::abs(term) < tol) {
      if (++small_run >= 3) return acc.sum();
    } else {
      small_run = 0;
    }
  }
  throw truncation_error("jacobi_poisson_classical_series: not resolved");
}

/// Complete-monotonicity probe for the subordination question. Evaluates
///   g(lambda) = - sum_i mass_i [ 2F1(r1, r2; beta; 1 - y_i) - 1 ] / (1 - y_i),
/// with r1,2(lambda) = (theta-1)/2 +- sqrt(2 lambda + (theta-1)^2/4), on a
/// lambda grid, then finite-differences up to order `max_order` and checks
/// the alternating sign pattern expected when g' is completely monotone.
/// This is a numerical probe, not a proof.
struct cm_probe_report {
  std::vector<double> lambdas;
  std::vector<double> values;
  int max_order_checked = 0;
  int first_violation_order = 0;  // 0 means no violation found
  double worst_violation = 0.0;
  bool pass = true;
};

inline double cm_r1(double lambda, double theta) {
  return 0.5 * (theta - 1.0) + std::sqrt(2.0 * lambda + 0.25 * (theta - 1.0) * (theta - 1.0));
}
inline double cm_r2(double lambda, double theta) {
  return 0.5 * (theta - 1.0) - std::sqrt(2.0 * lambda + 0.25 * (theta - 1.0) * (theta - 1.0));
}

inline cm_probe_report cm_probe(std::span<const double> lambda_grid,
                                const discrete_measure& nu, const model_params& p,
                                int max_order = 6) {
  p.require_stationary();
  if (lambda_grid.size() < static_cast<std::size_t>(max_order + 1))
    throw domain_error("cm_probe: grid too small for the requested order");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (!(lambda_grid[i] > lambda_grid[i - 1]) || !(lambda_grid[0] > 0.0))
      throw domain_error("cm_probe: lambda grid must be positive increasing");
  double theta = p.theta();

  cm_probe_report rep;
  rep.max_order_checked = max_order;
  rep.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  // uniform sub-grid spanning the same range, needed by plain finite differences
  std::size_t m = lambda_grid.size();
  double lo = lambda_grid.front(), hi = lambda_grid.back();
  double step = (hi - lo) / static_cast<double>(m - 1);
  auto g = [&](double lambda) {
    double r1 = cm_r1(lambda, theta), r2 = cm_r2(lambda, theta);
    kahan_accumulator acc;
    for (std::size_t i = 0; i < nu.size(); ++i) {
      double y = nu.atoms[i];
      if (!(y >= 0.0 && y < 1.0)) throw domain_error("cm_probe: nu atoms in [0,1)");
      double w = 1.0 - y;
      double f;
      if (w == 1.0) {
        f = hyp2f1_at_one(r1, r2, p.beta);
      } else if (w > 0.999) {
        f = hyp2f1_series(r1, r2, p.beta, w, 2000000);
      } else {
        f = hyp2f1_series(r1, r2, p.beta, w);
      }
      acc.add(-nu.masses[i] * (f - 1.0) / w);
    }
    return acc.sum();
  };
  std::vector<double> vals(m);
  for (std::size_t i = 0; i < m; ++i) vals[i] = g(lo + step * static_cast<double>(i));
  rep.values = vals;

  // forward differences: order-q sign should be (-1)^{q+1} when g' is CM
  std::vector<double> diff = vals;
  for (int order = 1; order <= max_order; ++order) {
    for (std::size_t i = 0; i + order < m; ++i) diff[i] = diff[i + 1] - diff[i];
    double want = (order % 2 == 1) ? 1.0 : -1.0;
    for (std::size_t i = 0; i + order < m; ++i) {
      double signed_val = want * diff[i];
      if (signed_val < -1e-12 * (std::abs(vals[i]) + 1.0)) {
        if (rep.first_violation_order == 0) rep.first_violation_order = order;
        rep.worst_violation = std::min(rep.worst_violation, signed_val);
        rep.pass = false;
      }
    }
  }
  return rep;
}

}  // namespace cdl
