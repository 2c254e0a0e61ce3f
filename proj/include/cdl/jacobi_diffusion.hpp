#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "lines_of_descent.hpp"
#include "special.hpp"
#include "types.hpp"

namespace cdl {

namespace detail {

inline density_value finish_density(double raw, int order, double last_mag,
                                    double tail_tol) {
  density_value out;
  out.truncation_order = order;
  out.last_term_magnitude = last_mag;
  if (raw < 0.0) {
    out.value = 0.0;
    out.clipped = true;
    (void)tail_tol;  // magnitude of the clipped value is bounded by the tail tolerance
  } else {
    out.value = raw;
  }
  return out;
}

}  // namespace detail

/// Transition density of the two-type diffusion by its spectral expansion:
///   f(x,y;t) = f_{ab}(y) { 1 + sum_{n>=1} rho_n(t) h_n R_n(x) R_n(y) }.
/// Truncation stops once `consecutive_small` successive terms fall below
/// tail_tol and the eigenvalue factor alone guarantees the remaining tail:
/// the polynomial factors can grow in n near the boundary, so term size by
/// itself is not a safe stopping rule.
inline density_value density_1d_eigen(double x, double y, double t,
                                      const model_params& p,
                                      const series_control& ctl = {}) {
  p.require_stationary();
  ctl.validate();
  if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0))
    throw domain_error("density_1d_eigen: x, y must lie in (0,1)");
  if (!(t > 0.0)) throw domain_error("density_1d_eigen: t must be positive");

  double theta = p.theta();
  double log_gate = std::log(1.0 / ctl.tail_tol);
  kahan_accumulator acc;
  acc.add(1.0);
  // stream the R recurrences at x and y together with the h_n ratio
  double rx2 = 1.0, ry2 = 1.0;
  double rx1 = 1.0 - (theta / p.beta) * (1.0 - x);
  double ry1 = 1.0 - (theta / p.beta) * (1.0 - y);
  double h = 0.0;
  int small_run = 0, n = 0;
  double last_mag = 0.0;
  for (n = 1; n <= ctl.max_terms; ++n) {
    double rx, ry;
    if (n == 1) {
      rx = rx1;
      ry = ry1;
      h = (theta + 1.0) * p.beta / p.alpha;
    } else {
      auto s = detail::r_step(n, p.alpha, p.beta);
      double u = 2.0 * x - 1.0, v = 2.0 * y - 1.0;
      rx = (s.b0 + s.bu * u) * rx1 - s.c * rx2;
      ry = (s.b0 + s.bu * v) * ry1 - s.c * ry2;
      rx2 = rx1; rx1 = rx;
      ry2 = ry1; ry1 = ry;
      h *= (2.0 * n + theta - 1.0) / (2.0 * n + theta - 3.0) * (theta + n - 2.0) *
           (p.beta + n - 1.0) / ((p.alpha + n - 1.0) * n);
    }
    double term = rho_eigenvalue(n, theta, t) * h * rx * ry;
    acc.add(term);
    last_mag = std::abs(term);
    if (last_mag < ctl.tail_tol) {
      if (++small_run >= ctl.consecutive_small &&
          0.5 * n * (n + theta - 1.0) * t > log_gate)
        break;
    } else {
      small_run = 0;
    }
  }
  if (n > ctl.max_terms)
    throw truncation_error("density_1d_eigen: tail bound not met within max_terms");
  double raw = beta_density(p, y) * acc.sum();
  return detail::finish_density(raw, n, last_mag, ctl.tail_tol);
}

/// Dual-expansion kernel: given the entrance-boundary weights q_k(t), the
/// transition density is the binomial-Beta mixture
///   f(x,y;t) = sum_k q_k(t) sum_{l<=k} C(k,l) x^l (1-x)^{k-l} f_{a+l,b+k-l}(y).
inline double density_1d_dual_given(double x, double y, const model_params& p,
                                    std::span<const double> q) {
  p.require_stationary();
  double lx = std::log(x), l1x = std::log1p(-x);
  double ly = std::log(y), l1y = std::log1p(-y);
  kahan_accumulator acc;
  for (int k = 0; k < static_cast<int>(q.size()); ++k) {
    if (q[k] == 0.0) continue;
    kahan_accumulator inner;
    for (int l = 0; l <= k; ++l) {
      double lg = log_binom(k, l) + l * lx + (k - l) * l1x +
                  (p.alpha + l - 1.0) * ly + (p.beta + k - l - 1.0) * l1y -
                  log_beta_fn(p.alpha + l, p.beta + k - l);
      inner.add(std::exp(lg));
    }
    acc.add(q[k] * inner.sum());
  }
  return acc.sum();
}

/// Transition density by the coalescent-dual expansion; the series over the
/// number of surviving non-mutant lineages is cut when the q tail is below
/// tail_tol.
inline density_value density_1d_dual(double x, double y, double t,
                                     const model_params& p,
                                     const series_control& ctl = {}) {
  p.require_stationary();
  ctl.validate();
  if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0))
    throw domain_error("density_1d_dual: x, y must lie in (0,1)");
  if (!(t > 0.0)) throw domain_error("density_1d_dual: t must be positive");
  auto q = q_entrance_pmf(p.theta(), t, ctl);
  double raw = density_1d_dual_given(x, y, p, q.probs);
  return detail::finish_density(raw, static_cast<int>(q.probs.size()), q.norm_defect,
                                ctl.tail_tol);
}

/// Residual of the eigenfunction identity: the backward generator
///   L = x(1-x)/2 d^2/dx^2 + (alpha - theta x)/2 d/dx
/// applied to the coefficient vector of the orthonormal polynomial must
/// equal -n(n+theta-1)/2 times it. Returns the max absolute residual of the
/// polynomial L P~_n + n(n+theta-1)/2 P~_n on a grid over [0,1].
inline double generator_eigen_check(int n, const model_params& p) {
  p.require_stationary();
  // Monomial coefficients grow like 4^n, so the algebra runs in quad
  // precision; the returned residual measures the identity itself rather
  // than basis conditioning.
  using quad = __float128;
  double theta = p.theta();
  std::vector<quad> cm2 = {quad(1)};
  std::vector<quad> c;
  if (n == 0) {
    c = cm2;
  } else {
    std::vector<quad> cm1 = {quad(1.0 - theta / p.beta), quad(theta / p.beta)};
    if (n == 1) {
      c = cm1;
    } else {
      for (int q = 2; q <= n; ++q) {
        auto s = detail::r_step(q, p.alpha, p.beta);
        std::vector<quad> r(static_cast<std::size_t>(q) + 1, quad(0));
        for (std::size_t i = 0; i < cm1.size(); ++i) {
          r[i] += (quad(s.b0) - quad(s.bu)) * cm1[i];
          r[i + 1] += quad(2) * quad(s.bu) * cm1[i];
        }
        for (std::size_t i = 0; i < cm2.size(); ++i) r[i] -= quad(s.c) * cm2[i];
        cm2 = std::move(cm1);
        cm1 = std::move(r);
      }
      c = cm1;
    }
  }
  quad scale = quad(std::sqrt(h_norm(n, p)));
  for (auto& v : c) v *= scale;
  std::vector<quad> res(c.size(), quad(0));
  // x(1-x)/2 p'' + (alpha - theta x)/2 p' contributes to powers k-1 and k
  for (int k = 0; k < static_cast<int>(c.size()); ++k) {
    quad ck = c[k];
    if (k >= 1) res[k - 1] += quad(0.5) * quad(k) * (quad(k) - 1 + quad(p.alpha)) * ck;
    res[k] -= quad(0.5) * quad(k) * (quad(k) + quad(theta) - 1) * ck;
  }
  quad lambda = quad(0.5) * quad(n) * (quad(n) + quad(theta) - 1);
  for (int k = 0; k < static_cast<int>(c.size()); ++k) res[k] += lambda * c[k];
  double worst = 0.0;
  for (int g = 0; g <= 40; ++g) {
    quad x = quad(g) / quad(40);
    quad v = 0;
    for (int k = static_cast<int>(res.size()) - 1; k >= 0; --k) v = v * x + res[k];
    double vd = static_cast<double>(v);
    worst = std::max(worst, std::abs(vd));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// d-dimensional machinery on the simplex
// ---------------------------------------------------------------------------

namespace detail {

/// Enumerates compositions l of m into d nonnegative parts, calling
/// f(l) for each. Throws once `cap` compositions have been visited.
template <class F>
void for_each_composition(int m, int d, long long cap, F&& f) {
  std::vector<int> l(static_cast<std::size_t>(d), 0);
  long long count = 0;
  std::function<void(int, int)> rec = [&](int pos, int rest) {
    if (pos == d - 1) {
      l[pos] = rest;
      if (++count > cap)
        throw combinatorial_limit("composition enumeration exceeded the cap");
      f(l);
      return;
    }
    for (int v = 0; v <= rest; ++v) {
      l[pos] = v;
      rec(pos + 1, rest - v);
    }
  };
  rec(0, m);
}

}  // namespace detail

inline constexpr long long default_composition_cap = 1000000;

/// Symmetric product sum xi_m(x, y) = sum_{|l|=m} (m choose l)
/// (theta)_(m) / prod (eps_i)_(l_i) * prod (x_i y_i)^{l_i}.
inline double xi_m(int m, std::span<const double> x, std::span<const double> y,
                   const dirichlet_params& dp,
                   long long cap = default_composition_cap) {
  if (m < 0) throw domain_error("xi_m: m must be nonnegative");
  if (!dp.all_positive()) throw domain_error("xi_m: requires eps_i > 0");
  int d = dp.d();
  if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != d)
    throw domain_error("xi_m: dimension mismatch");
  if (m == 0) return 1.0;
  // per-coordinate tables: log (eps_i)_(l), log l!, l*log(x_i y_i)
  std::vector<std::vector<double>> lr(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> lxy(static_cast<std::size_t>(d));
  std::vector<double> lfact(static_cast<std::size_t>(m) + 1);
  for (int l = 0; l <= m; ++l) lfact[l] = std::lgamma(l + 1.0);
  for (int i = 0; i < d; ++i) {
    lr[i].resize(static_cast<std::size_t>(m) + 1);
    lxy[i].resize(static_cast<std::size_t>(m) + 1);
    double lx = std::log(x[i] * y[i]);
    for (int l = 0; l <= m; ++l) {
      lr[i][l] = log_rising_pos(dp.eps[i], l);
      lxy[i][l] = l * lx;
    }
  }
  double pref = log_rising_pos(dp.theta(), m) + lfact[m];
  kahan_accumulator acc;
  detail::for_each_composition(m, d, cap, [&](const std::vector<int>& l) {
    double lg = pref;
    for (int i = 0; i < d; ++i) lg += lxy[i][l[i]] - lr[i][l[i]] - lfact[l[i]];
    acc.add(std::exp(lg));
  });
  return acc.sum();
}

/// xi_0 .. xi_mmax in one pass (shared tables).
inline std::vector<double> xi_all(int mmax, std::span<const double> x,
                                  std::span<const double> y,
                                  const dirichlet_params& dp,
                                  long long cap = default_composition_cap) {
  std::vector<double> out(static_cast<std::size_t>(mmax) + 1);
  for (int m = 0; m <= mmax; ++m) out[m] = xi_m(m, x, y, dp, cap);
  return out;
}

/// Degree-|n| kernel polynomial on the Dirichlet law, from precomputed xi:
///   Q_N(x,y) = (theta + 2N - 1) sum_{m=0}^{N} (-1)^{N-m}
///              (theta+m)_(N-1) / (m! (N-m)!) xi_m.
inline double kernel_q_from_xi(int nabs, std::span<const double> xi, double theta) {
  if (nabs < 1) throw domain_error("kernel_q: need |n| >= 1");
  kahan_accumulator acc;
  for (int m = 0; m <= nabs; ++m) {
    signed_log r = log_rising(theta + m, nabs - 1);
    if (r.sign == 0) continue;
    double lg = r.log_abs - std::lgamma(m + 1.0) - std::lgamma(nabs - m + 1.0);
    double sgn = (((nabs - m) % 2 == 0) ? 1.0 : -1.0) * r.sign;
    acc.add(sgn * std::exp(lg) * xi[m]);
  }
  return (theta + 2.0 * nabs - 1.0) * acc.sum();
}

inline double kernel_q(int nabs, std::span<const double> x,
                       std::span<const double> y, const dirichlet_params& dp,
                       long long cap = default_composition_cap) {
  auto xi = xi_all(nabs, x, y, dp, cap);
  return kernel_q_from_xi(nabs, xi, dp.theta());
}

/// Transition density of the d-type diffusion by the spectral expansion
///   f(x,y;t) = D(y,eps) { 1 + sum_{|n|>=1} rho_|n|(t) Q_|n|(x,y) }.
inline density_value density_ddim_eigen(std::span<const double> x,
                                        std::span<const double> y, double t,
                                        const dirichlet_params& dp,
                                        const series_control& ctl = {},
                                        long long cap = default_composition_cap) {
  if (!dp.all_positive()) throw domain_error("density_ddim_eigen: requires eps_i > 0");
  ctl.validate();
  if (!(t > 0.0)) throw domain_error("density_ddim_eigen: t must be positive");
  double theta = dp.theta();
  double log_gate = std::log(1.0 / ctl.tail_tol);
  kahan_accumulator acc;
  acc.add(1.0);
  std::vector<double> xi = {1.0};
  int small_run = 0, nabs = 0;
  double last_mag = 0.0;
  for (nabs = 1; nabs <= ctl.max_terms; ++nabs) {
    xi.push_back(xi_m(nabs, x, y, dp, cap));
    double term = rho_eigenvalue(nabs, theta, t) * kernel_q_from_xi(nabs, xi, theta);
    acc.add(term);
    last_mag = std::abs(term);
    if (last_mag < ctl.tail_tol) {
      if (++small_run >= ctl.consecutive_small &&
          0.5 * nabs * (nabs + theta - 1.0) * t > log_gate)
        break;
    } else {
      small_run = 0;
    }
  }
  if (nabs > ctl.max_terms)
    throw truncation_error("density_ddim_eigen: tail bound not met within max_terms");
  double raw = dirichlet_density(dp, y) * acc.sum();
  return detail::finish_density(raw, nabs, last_mag, ctl.tail_tol);
}

/// eps = 0 product sum over strictly positive compositions:
///   xi0_m = sum_{l>0, |l|=m} (m choose l) (m-1)! / prod (l_i - 1)! * prod (x_i y_i)^{l_i}.
inline double xi0_m(int m, std::span<const double> x, std::span<const double> y,
                    int d, long long cap = default_composition_cap) {
  if (m < d) return 0.0;  // no strictly positive composition exists
  std::vector<double> lxy(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0))
      throw domain_error("xi0_m: coordinates must be strictly positive");
    lxy[i] = std::log(x[i] * y[i]);
  }
  double pref = std::lgamma(static_cast<double>(m)) + std::lgamma(m + 1.0);
  kahan_accumulator acc;
  // enumerate l - 1 over compositions of m - d
  detail::for_each_composition(m - d, d, cap, [&](const std::vector<int>& lm1) {
    double lg = pref;
    for (int i = 0; i < d; ++i) {
      int li = lm1[i] + 1;
      lg += li * lxy[i] - 2.0 * std::lgamma(static_cast<double>(li)) -
            std::log(static_cast<double>(li));
    }
    acc.add(std::exp(lg));
  });
  return acc.sum();
}

/// eps = 0 transient kernel
///   Q0_N(x,y) = (2N-1) sum_{m=1}^{N} (-1)^{N-m} (m)_(N-1)/(m!(N-m)!) xi0_m.
inline double kernel_q0(int nabs, std::span<const double> x,
                        std::span<const double> y, int d,
                        long long cap = default_composition_cap) {
  if (nabs < d) throw domain_error("kernel_q0: need |n| >= d");
  kahan_accumulator acc;
  for (int m = d; m <= nabs; ++m) {
    double lg = log_rising_pos(static_cast<double>(m), nabs - 1) -
                std::lgamma(m + 1.0) - std::lgamma(nabs - m + 1.0);
    double sgn = ((nabs - m) % 2 == 0) ? 1.0 : -1.0;
    acc.add(sgn * std::exp(lg) * xi0_m(m, x, y, d, cap));
  }
  return (2.0 * nabs - 1.0) * acc.sum();
}

/// Transient (eps = 0) transition density
///   f(x,y;t) = prod_j y_j^{-1} sum_{|n| >= d} rho_|n|(t) Q0_|n|(x,y);
/// total mass over y is the probability that the process has not yet been
/// absorbed, which is < 1.
inline density_value density_ddim_eps0(std::span<const double> x,
                                       std::span<const double> y, double t, int d,
                                       const series_control& ctl = {},
                                       long long cap = default_composition_cap) {
  ctl.validate();
  if (!(t > 0.0)) throw domain_error("density_ddim_eps0: t must be positive");
  double log_gate = std::log(1.0 / ctl.tail_tol);
  kahan_accumulator acc;
  int small_run = 0, nabs = d - 1;
  double last_mag = 0.0;
  for (nabs = d; nabs <= ctl.max_terms; ++nabs) {
    double term = rho_eigenvalue(nabs, 0.0, t) * kernel_q0(nabs, x, y, d, cap);
    acc.add(term);
    last_mag = std::abs(term);
    if (last_mag < ctl.tail_tol) {
      if (++small_run >= ctl.consecutive_small &&
          0.5 * nabs * (nabs - 1.0) * t > log_gate)
        break;
    } else {
      small_run = 0;
    }
  }
  if (nabs > ctl.max_terms)
    throw truncation_error("density_ddim_eps0: tail bound not met within max_terms");
  double pref = 1.0;
  for (int i = 0; i < d; ++i) pref /= y[i];
  return detail::finish_density(pref * acc.sum(), nabs, last_mag, ctl.tail_tol);
}

/// Coalescent-mixture form of the d-type transition density:
///   f(x,y;t) = sum_{|l|} q_|l|(t) sum_{l} M(l,x) D(y, eps + l),
/// where M(l,x) is the multinomial law of the surviving line types and
/// D(y, eps + l) the posterior Dirichlet density. Components with
/// eps_i + l_i = 0 live on the boundary face {y_i = 0} and contribute
/// nothing at interior y.
inline density_value density_ddim_dual(std::span<const double> x,
                                       std::span<const double> y, double t,
                                       const dirichlet_params& dp,
                                       const series_control& ctl = {},
                                       long long cap = default_composition_cap) {
  ctl.validate();
  if (!(t > 0.0)) throw domain_error("density_ddim_dual: t must be positive");
  int d = dp.d();
  double theta = dp.theta();
  std::vector<double> lx(static_cast<std::size_t>(d)), ly(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  auto q = q_entrance_pmf(theta, t, ctl);
  kahan_accumulator acc;
  for (int lsum = 0; lsum < static_cast<int>(q.probs.size()); ++lsum) {
    if (q.probs[lsum] == 0.0) continue;
    kahan_accumulator inner;
    double pref = std::lgamma(lsum + 1.0) + std::lgamma(theta + lsum);
    detail::for_each_composition(lsum, d, cap, [&](const std::vector<int>& l) {
      double lg = pref;
      for (int i = 0; i < d; ++i) {
        double ai = dp.eps[i] + l[i];
        if (ai == 0.0) {
          lg = -std::numeric_limits<double>::infinity();  // boundary-face mass
          break;
        }
        lg += l[i] * lx[i] - std::lgamma(l[i] + 1.0) + (ai - 1.0) * ly[i] -
              std::lgamma(ai);
      }
      if (std::isfinite(lg)) inner.add(std::exp(lg));
    });
    acc.add(q.probs[lsum] * inner.sum());
  }
  return detail::finish_density(acc.sum(), static_cast<int>(q.probs.size()),
                                q.norm_defect, ctl.tail_tol);
}

}  // namespace cdl
