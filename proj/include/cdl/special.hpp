#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <span>
#include <vector>

#include "accum.hpp"
#include "errors.hpp"
#include "types.hpp"

namespace cdl {

namespace detail {

inline bool is_nonpositive_integer(double x) {
  return x <= 0.0 && x == std::floor(x);
}

/// Sign of Gamma(x); 0 at the poles.
inline int gamma_sign(double x) {
  if (x > 0.0) return 1;
  if (x == std::floor(x)) return 0;
  // Gamma alternates sign on the intervals (-k-1, -k).
  long long f = static_cast<long long>(std::floor(x));
  return (f % 2 != 0) ? -1 : 1;
}

}  // namespace detail

/// log of the rising factorial (a)_(n) = a(a+1)...(a+n-1) for a > 0, (a)_(0) = 1.
inline double log_rising_pos(double a, int n) {
  if (n == 0) return 0.0;
  return std::lgamma(a + n) - std::lgamma(a);
}

/// Rising factorial in log-magnitude/sign form, valid for any real a.
/// A factor that is exactly zero yields sign 0.
inline signed_log log_rising(double a, int n) {
  if (n < 0) throw domain_error("log_rising: n must be nonnegative");
  if (n == 0) return signed_log::one();
  if (a > 0.0) return {log_rising_pos(a, n), 1};
  // Count strictly negative factors a, a+1, ..., a+n-1 and detect exact zeros.
  double last = a + n - 1;
  if (a == std::floor(a) && last >= 0.0) return signed_log::zero();  // hits zero exactly
  if (last < 0.0) {
    // all factors negative: |prod| = (-a)(-a-1)...(-last) = Gamma(1-a)/Gamma(-last)
    double lg = std::lgamma(1.0 - a) - std::lgamma(-last);
    return {lg, (n % 2 != 0) ? -1 : 1};
  }
  int m = static_cast<int>(std::ceil(-a));  // factors with index k < m are negative
  if (a + m == 0.0) return signed_log::zero();
  double neg = std::lgamma(1.0 - a) - std::lgamma(1.0 - a - m);
  double pos = std::lgamma(a + n) - std::lgamma(a + m);
  return {neg + pos, (m % 2 != 0) ? -1 : 1};
}

inline double rising(double a, int n) { return log_rising(a, n).to_double(); }

/// log C(n, k) for real n > -1 and integer 0 <= k.
inline double log_binom(double n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(n - k + 1.0);
}

/// Terminating Gauss hypergeometric sum 2F1(-N, b; c; z) =
/// sum_{k=0}^{N} (-N)_(k) (b)_(k) / ((c)_(k) k!) z^k.
/// Terms are built in log-magnitude/sign form and combined with a compensated
/// sum after rescaling by the largest term.
inline double hyp2f1_terminating(int a, double b, double c, double z) {
  if (a > 0) throw domain_error("hyp2f1_terminating: first parameter must be <= 0");
  int n_terms = -a;
  if (detail::is_nonpositive_integer(b)) {
    int nb = static_cast<int>(-b);
    if (nb < n_terms) n_terms = nb;
  }
  if (detail::is_nonpositive_integer(c) && -c <= n_terms - 1)
    throw pole_error("hyp2f1_terminating: lower parameter pole before termination");
  if (n_terms == 0 || z == 0.0) return 1.0;

  signed_log zlog = signed_log::from(z);
  std::vector<double> logs(static_cast<std::size_t>(n_terms) + 1);
  std::vector<int> signs(static_cast<std::size_t>(n_terms) + 1);
  double max_log = 0.0;
  logs[0] = 0.0;
  signs[0] = 1;
  for (int k = 1; k <= n_terms; ++k) {
    signed_log t = log_rising(static_cast<double>(a), k) * log_rising(b, k) /
                   log_rising(c, k);
    t.log_abs += k * zlog.log_abs - std::lgamma(k + 1.0);
    if (zlog.sign < 0 && k % 2 != 0) t.sign = -t.sign;  // sign(z^k) = sign(z)^k
    logs[k] = t.log_abs;
    signs[k] = t.sign;
    if (t.sign != 0 && t.log_abs > max_log) max_log = t.log_abs;
  }
  kahan_accumulator acc;
  for (int k = 0; k <= n_terms; ++k) {
    if (signs[k] == 0) continue;
    acc.add(signs[k] * std::exp(logs[k] - max_log));
  }
  return std::exp(max_log) * acc.sum();
}

/// Terminating 2F1 at a complex argument (used by the complex-variable
/// Monte Carlo representations); forward ratio recurrence.
inline std::complex<double> hyp2f1_terminating(int a, double b, double c,
                                               std::complex<double> z) {
  if (a > 0) throw domain_error("hyp2f1_terminating: first parameter must be <= 0");
  int n_terms = -a;
  if (detail::is_nonpositive_integer(b)) {
    int nb = static_cast<int>(-b);
    if (nb < n_terms) n_terms = nb;
  }
  if (detail::is_nonpositive_integer(c) && -c <= n_terms - 1)
    throw pole_error("hyp2f1_terminating: lower parameter pole before termination");
  std::complex<double> sum = 1.0, term = 1.0;
  for (int k = 0; k < n_terms; ++k) {
    term *= (static_cast<double>(a) + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
    sum += term;
  }
  return sum;
}

/// Non-terminating Gauss series for |z| < 1 (all parameters real).
inline double hyp2f1_series(double a, double b, double c, double z,
                            int max_iter = 200000) {
  if (std::abs(z) >= 1.0)
    throw non_terminating_series("hyp2f1_series: |z| >= 1");
  kahan_accumulator acc;
  acc.add(1.0);
  double term = 1.0;
  int small_count = 0;
  for (int k = 0; k < max_iter; ++k) {
    double denom = c + k;
    if (denom == 0.0) throw pole_error("hyp2f1_series: lower parameter pole");
    term *= (a + k) * (b + k) / (denom * (k + 1.0)) * z;
    acc.add(term);
    if (std::abs(term) <= 1e-17 * (std::abs(acc.sum()) + 1.0)) {
      if (++small_count >= 3) return acc.sum();
    } else {
      small_count = 0;
    }
  }
  throw non_terminating_series("hyp2f1_series: no convergence within max_iter");
}

/// 2F1(a, b; c; 1) by the Gauss summation formula; needs c - a - b > 0.
/// A Gamma pole in the denominator means the value is zero.
inline double hyp2f1_at_one(double a, double b, double c) {
  double s = c - a - b;
  if (!(s > 0.0))
    throw non_terminating_series("hyp2f1_at_one: requires c - a - b > 0");
  if (detail::gamma_sign(c - a) == 0 || detail::gamma_sign(c - b) == 0) return 0.0;
  int sg = detail::gamma_sign(c) * detail::gamma_sign(s) *
           detail::gamma_sign(c - a) * detail::gamma_sign(c - b);
  double lg = std::lgamma(c) + std::lgamma(s) - std::lgamma(c - a) - std::lgamma(c - b);
  return sg * std::exp(lg);
}

/// Classical Jacobi polynomial P_n^(a,b)(u) on [-1, 1] by the three-term
/// recurrence; a, b > -1.
inline double jacobi_p_classical(int n, double a, double b, double u) {
  if (n < 0) throw domain_error("jacobi_p_classical: n must be nonnegative");
  if (n == 0) return 1.0;
  double pm2 = 1.0;
  double pm1 = 0.5 * (a - b) + (1.0 + 0.5 * (a + b)) * u;
  if (n == 1) return pm1;
  for (int q = 2; q <= n; ++q) {
    double apb = a + b;
    double a1 = 2.0 * q * (q + apb) * (2.0 * q + apb - 2.0);
    double a2 = (2.0 * q + apb - 1.0) * (a * a - b * b);
    double a3 = (2.0 * q + apb - 1.0) * (2.0 * q + apb) * (2.0 * q + apb - 2.0);
    double a4 = 2.0 * (q + a - 1.0) * (q + b - 1.0) * (2.0 * q + apb);
    double p = ((a2 + a3 * u) * pm1 - a4 * pm2) / a1;
    pm2 = pm1;
    pm1 = p;
  }
  return pm1;
}

namespace detail {

/// Recurrence coefficients for R_n normalized so R_n(1) = 1. Writing
/// u = 2x - 1, the step for n >= 2 is
///   R_n = (bcoef_const + bcoef_u * u) * R_{n-1} - ccoef * R_{n-2}.
struct r_recurrence_step {
  double bu, b0, c;
};

inline r_recurrence_step r_step(int n, double alpha, double beta) {
  double theta = alpha + beta;
  double a = beta - 1.0, b = alpha - 1.0;  // classical exponents
  double an = 2.0 * n * (n + theta - 2.0) * (2.0 * n + theta - 4.0);
  double bn_u = (2.0 * n + theta - 3.0) * (2.0 * n + theta - 2.0) * (2.0 * n + theta - 4.0);
  double bn_0 = (2.0 * n + theta - 3.0) * (a * a - b * b);
  double cn = 2.0 * (n + beta - 2.0) * (n + alpha - 2.0) * (2.0 * n + theta - 2.0);
  double g1 = n / (beta + n - 1.0);                      // gamma_n / gamma_{n-1}
  double g2 = g1 * (n - 1.0) / (beta + n - 2.0);         // gamma_n / gamma_{n-2}
  return {bn_u * g1 / an, bn_0 * g1 / an, cn * g2 / an};
}

}  // namespace detail

/// Jacobi polynomial R_n(x) = 2F1(-n, n+theta-1; beta; 1-x), normalized so
/// that R_n(1) = 1 for every n. This is the production (recurrence) path; the
/// terminating hypergeometric sum serves as an independent check.
inline double jacobi_r(int n, const model_params& p, double x) {
  if (n < 0) throw domain_error("jacobi_r: n must be nonnegative");
  if (p.beta <= 0.0) throw domain_error("jacobi_r: requires beta > 0");
  if (n == 0) return 1.0;
  double theta = p.theta();
  double u = 2.0 * x - 1.0;
  double rm2 = 1.0;
  double rm1 = 1.0 - (theta / p.beta) * (1.0 - x);
  if (n == 1) return rm1;
  for (int q = 2; q <= n; ++q) {
    auto s = detail::r_step(q, p.alpha, p.beta);
    double r = (s.b0 + s.bu * u) * rm1 - s.c * rm2;
    rm2 = rm1;
    rm1 = r;
  }
  return rm1;
}

/// R_0(x) .. R_nmax(x) in one recurrence sweep.
inline std::vector<double> jacobi_r_all(int nmax, const model_params& p, double x) {
  if (nmax < 0) throw domain_error("jacobi_r_all: nmax must be nonnegative");
  if (p.beta <= 0.0) throw domain_error("jacobi_r_all: requires beta > 0");
  std::vector<double> out(static_cast<std::size_t>(nmax) + 1);
  out[0] = 1.0;
  if (nmax == 0) return out;
  double theta = p.theta();
  double u = 2.0 * x - 1.0;
  out[1] = 1.0 - (theta / p.beta) * (1.0 - x);
  for (int q = 2; q <= nmax; ++q) {
    auto s = detail::r_step(q, p.alpha, p.beta);
    out[q] = (s.b0 + s.bu * u) * out[q - 1] - s.c * out[q - 2];
  }
  return out;
}

/// Coefficients of R_n as a polynomial in x (ascending powers), obtained by
/// running the recurrence in coefficient space.
inline std::vector<double> jacobi_r_coefficients(int n, const model_params& p) {
  if (n < 0) throw domain_error("jacobi_r_coefficients: n must be nonnegative");
  if (p.beta <= 0.0) throw domain_error("jacobi_r_coefficients: requires beta > 0");
  double theta = p.theta();
  std::vector<double> rm2 = {1.0};
  if (n == 0) return rm2;
  std::vector<double> rm1 = {1.0 - theta / p.beta, theta / p.beta};
  if (n == 1) return rm1;
  for (int q = 2; q <= n; ++q) {
    auto s = detail::r_step(q, p.alpha, p.beta);
    std::vector<double> r(static_cast<std::size_t>(q) + 1, 0.0);
    // (b0 - bu) * rm1 + 2*bu * x * rm1 - c * rm2, since u = 2x - 1
    for (std::size_t i = 0; i < rm1.size(); ++i) {
      r[i] += (s.b0 - s.bu) * rm1[i];
      r[i + 1] += 2.0 * s.bu * rm1[i];
    }
    for (std::size_t i = 0; i < rm2.size(); ++i) r[i] -= s.c * rm2[i];
    rm2 = std::move(rm1);
    rm1 = std::move(r);
  }
  return rm1;
}

/// log h_n, where h_n = (2n+theta-1)(theta)_(n-1)(beta)_(n) / ((alpha)_(n) n!)
/// is the reciprocal of E[R_n(Y)^2] under Beta(alpha, beta). h_n R_n(x) R_n(y)
/// is the degree-n term of the spectral expansions, and sqrt(h_n) R_n is the
/// orthonormal polynomial.
inline double log_h_norm(int n, const model_params& p) {
  if (n < 0) throw domain_error("h_norm: n must be nonnegative");
  p.require_stationary();
  if (n == 0) return 0.0;
  double theta = p.theta();
  return std::log(2.0 * n + theta - 1.0) + log_rising_pos(theta, n - 1) +
         log_rising_pos(p.beta, n) - log_rising_pos(p.alpha, n) -
         std::lgamma(n + 1.0);
}

inline double h_norm(int n, const model_params& p) {
  return n == 0 ? 1.0 : std::exp(log_h_norm(n, p));
}

/// Orthonormal Jacobi polynomial on Beta(alpha, beta):
/// E[ P~_m(Y) P~_n(Y) ] = delta_{mn}.
inline double jacobi_orthonormal(int n, const model_params& p, double x) {
  p.require_stationary();
  return std::sqrt(h_norm(n, p)) * jacobi_r(n, p, x);
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Beta(alpha, beta) density at y in (0, 1).
inline double beta_density(const model_params& p, double y) {
  p.require_stationary();
  if (!(y > 0.0 && y < 1.0)) throw domain_error("beta_density: y must lie in (0,1)");
  return std::exp((p.alpha - 1.0) * std::log(y) + (p.beta - 1.0) * std::log1p(-y) -
                  log_beta_fn(p.alpha, p.beta));
}

/// Dirichlet(eps) density at an interior simplex point.
inline double dirichlet_density(const dirichlet_params& dp, std::span<const double> x) {
  if (!dp.all_positive()) throw domain_error("dirichlet_density: requires eps_i > 0");
  if (static_cast<int>(x.size()) != dp.d())
    throw domain_error("dirichlet_density: dimension mismatch");
  double sum = 0.0;
  for (double v : x) {
    if (!(v > 0.0)) throw domain_error("dirichlet_density: x must be interior");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw domain_error("dirichlet_density: coordinates must sum to 1");
  double lg = std::lgamma(dp.theta());
  for (int i = 0; i < dp.d(); ++i)
    lg += (dp.eps[i] - 1.0) * std::log(x[i]) - std::lgamma(dp.eps[i]);
  return std::exp(lg);
}

}  // namespace cdl
