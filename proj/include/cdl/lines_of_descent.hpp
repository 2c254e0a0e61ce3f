#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "accum.hpp"
#include "special.hpp"
#include "types.hpp"

namespace cdl {

/// Eigenvalue rho_n(t) = exp{ -n(n+theta-1) t / 2 } of the two-type diffusion.
inline double rho_eigenvalue(int n, double theta, double t) {
  if (n < 0 || t < 0.0) throw domain_error("rho_eigenvalue: need n >= 0, t >= 0");
  return std::exp(-0.5 * n * (n + theta - 1.0) * t);
}

namespace detail {

/// Alternating-series accumulator for the death-process sums: consecutive
/// terms are paired before accumulation and the largest partial sum is
/// recorded so cancellation can be diagnosed. Raises precision_loss when the
/// cancellation estimate max|partial| / |result| exceeds 1e12.
class alternating_series {
 public:
  void add(double term) {
    if (pending_) {
      acc_.add(held_ + term);
      pending_ = false;
    } else {
      held_ = term;
      pending_ = true;
    }
    double running = current();
    max_partial_ = std::max(max_partial_, std::abs(running));
  }
  double current() const { return acc_.sum() + (pending_ ? held_ : 0.0); }
  double finish(const char* who) const {
    double s = current();
    // Absolute rounding error is ~ max|partial| * eps. A large ratio only
    // matters when that absolute error is material on the probability scale;
    // deep-tail values with error below 1e-10 are returned as-is.
    double abs_err = max_partial_ * 1e-16;
    double scale = std::max(std::abs(s), 1e-300);
    if (abs_err > 1e-10 && max_partial_ / scale > 1e12)
      throw precision_loss(std::string(who) + ": cancellation estimate exceeds 1e12");
    return s;
  }

 private:
  kahan_accumulator acc_;
  double held_ = 0.0;
  bool pending_ = false;
  double max_partial_ = 0.0;
};

inline double log_q_entrance_coeff(int j, int k, double theta) {
  // (2j + theta - 1) (k + theta)_(j-1) / (k! (j-k)!), all positive for j >= 1
  return std::log(2.0 * j + theta - 1.0) + log_rising_pos(k + theta, j - 1) -
         std::lgamma(k + 1.0) - std::lgamma(j - k + 1.0);
}

}  // namespace detail

/// Transition function q_k(t) of the lines-of-descent death process started
/// from the entrance boundary at infinity: death rate k(k+theta-1)/2 from
/// state k. For theta = 0 the process counts edges of a coalescent tree and
/// never reaches 0; q_0 is identically 0 there.
inline double q_entrance(int k, double theta, double t,
                         const series_control& ctl = {}) {
  if (k < 0) throw domain_error("q_entrance: k must be nonnegative");
  if (!(t > 0.0)) throw domain_error("q_entrance: t must be positive");
  if (theta < 0.0) throw domain_error("q_entrance: theta must be nonnegative");
  ctl.validate();
  if (theta == 0.0 && k == 0) return 0.0;

  detail::alternating_series acc;
  int small_run = 0;
  double last = 0.0;
  double log_rho_gate = std::log(1.0 / ctl.tail_tol);
  for (int j = std::max(k, 0); ; ++j) {
    double term;
    if (j == 0) {
      term = 1.0;  // limit of (theta-1)(theta)_(-1) as the leading coefficient
    } else {
      double lg = detail::log_q_entrance_coeff(j, k, theta) -
                  0.5 * j * (j + theta - 1.0) * t;
      if (lg > 700.0)
        throw precision_loss("q_entrance: term magnitude overflows double range");
      double sgn = ((j - k) % 2 == 0) ? 1.0 : -1.0;
      term = sgn * std::exp(lg);
    }
    acc.add(term);
    last = std::abs(term);
    int used = j - k + 1;
    if (last < ctl.tail_tol) {
      if (++small_run >= ctl.consecutive_small &&
          0.5 * j * (j + theta - 1.0) * t > log_rho_gate)
        return acc.finish("q_entrance");
    } else {
      small_run = 0;
    }
    if (used >= ctl.max_terms)
      throw truncation_error("q_entrance: tail bound not met within max_terms");
  }
}

/// Entrance-boundary distribution assembled as a probability vector; stops
/// once the accumulated mass is within tail_tol of 1.
inline prob_vector q_entrance_pmf(double theta, double t,
                                  const series_control& ctl = {},
                                  int k_max = 4000) {
  std::vector<double> probs;
  double mass = 0.0;
  int negligible_run = 0;
  for (int k = 0; k <= k_max; ++k) {
    double q = q_entrance(k, theta, t, ctl);
    probs.push_back(std::max(q, 0.0));
    mass += probs.back();
    if (k >= 1 && 1.0 - mass < ctl.tail_tol) break;
    // the tail decays faster than exponentially; once several successive
    // entries are at rounding level the remaining defect is irreducible
    if (probs.back() < 1e-15 && mass > 0.5) {
      if (++negligible_run >= 5) break;
    } else {
      negligible_run = 0;
    }
  }
  if (1.0 - mass >= std::sqrt(ctl.tail_tol))
    throw truncation_error("q_entrance_pmf: mass not captured within k_max");
  prob_vector out;
  out.probs = std::move(probs);
  out.norm_defect = std::abs(1.0 - mass);
  return out;
}

/// Transition function q_{nk}(t) of the death process started from n.
inline double q_finite(int n, int k, double theta, double t) {
  if (n < 0 || k < 0 || k > n) throw domain_error("q_finite: need 0 <= k <= n");
  if (n == 0) return 1.0;  // empty process stays empty
  if (theta == 0.0 && k == 0) return 0.0;  // the last edge never dies
  if (!(t > 0.0)) throw domain_error("q_finite: t must be positive");
  if (theta < 0.0) throw domain_error("q_finite: theta must be nonnegative");

  detail::alternating_series acc;
  for (int j = k; j <= n; ++j) {
    double term;
    if (j == 0) {
      term = 1.0;
    } else {
      signed_log kp = log_rising(k + theta, j - 1);  // zero for theta=0, k=0, j>=2
      if (kp.sign == 0) continue;
      double lg = std::log(2.0 * j + theta - 1.0) + kp.log_abs -
                  std::lgamma(k + 1.0) - std::lgamma(j - k + 1.0) +
                  std::lgamma(n + 1.0) - std::lgamma(n - j + 1.0) -
                  log_rising_pos(n + theta, j) - 0.5 * j * (j + theta - 1.0) * t;
      if (lg > 700.0) throw precision_loss("q_finite: term magnitude overflow");
      double sgn = ((j - k) % 2 == 0) ? 1.0 : -1.0;
      term = sgn * kp.sign * std::exp(lg);
    }
    acc.add(term);
  }
  return acc.finish("q_finite");
}

/// Full row q_{n.}(t) as a probability vector over k = 0..n.
inline prob_vector q_finite_row(int n, double theta, double t) {
  std::vector<double> probs(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) probs[k] = std::max(q_finite(n, k, theta, t), 0.0);
  double mass = 0.0;
  for (double v : probs) mass += v;
  prob_vector out;
  out.probs = std::move(probs);
  out.norm_defect = std::abs(1.0 - mass);
  return out;
}

namespace detail {

struct welford {
  std::int64_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double se() const { return n > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

}  // namespace detail

/// Monte Carlo evaluation of q_k(t) through the complex-variable
/// representation: with X ~ N(0,t), Z = e^{iX} and w = e^{-theta t / 2},
///   q_k(t) = e^{t/8} Gamma(2k+theta) / (Gamma(k+theta) k!)
///            E[ (wZ)^k (1 - wZ) / (sqrt(Z) (1 + wZ)^{2k+theta}) ].
/// The imaginary part of the average is returned as a diagnostic.
inline mc_complex_estimate q_entrance_mc(int k, double theta, double t,
                                         std::int64_t replicates,
                                         std::uint64_t seed) {
  if (k < 0 || !(t > 0.0) || replicates < 2)
    throw domain_error("q_entrance_mc: bad arguments");
  mc_complex_estimate out;
  out.real_part.replicates = out.imag_part.replicates = replicates;
  out.real_part.seed = out.imag_part.seed = seed;
  if (theta == 0.0 && k == 0) return out;  // q_0 is identically zero

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(t));
  double w = std::exp(-0.5 * theta * t);
  double expo = 2.0 * k + theta;
  detail::welford re, im;
  for (std::int64_t i = 0; i < replicates; ++i) {
    double x = normal(rng);
    std::complex<double> z(std::cos(x), std::sin(x));
    std::complex<double> wz = w * z;
    // sqrt(Z) means e^{iX/2}, continuous along the Brownian path
    std::complex<double> sqrt_z(std::cos(0.5 * x), std::sin(0.5 * x));
    std::complex<double> val = std::pow(wz, static_cast<double>(k)) * (1.0 - wz) /
                               (sqrt_z * std::pow(1.0 + wz, expo));
    re.add(val.real());
    im.add(val.imag());
  }
  double pref = std::exp(t / 8.0 + std::lgamma(2.0 * k + theta) -
                         std::lgamma(k + theta) - std::lgamma(k + 1.0));
  out.real_part.mean = pref * re.mean;
  out.real_part.std_error = pref * re.se();
  out.imag_part.mean = pref * im.mean;
  out.imag_part.std_error = pref * im.se();
  return out;
}

/// Complex-variable Monte Carlo for the finite start:
///   q_{nk}(t) = Gamma(n+theta) Gamma(2k+theta) / (Gamma(k+theta) Gamma(n+k+theta))
///               C(n,k) e^{(theta-1)^2 t / 8}
///               E[ Z^{k+(theta-1)/2} (1-Z) 2F1(-n+k+1, 2k+theta; n+k+theta; Z) ].
inline mc_complex_estimate q_finite_mc(int n, int k, double theta, double t,
                                       std::int64_t replicates, std::uint64_t seed) {
  if (n < 1 || k < 0 || k > n || !(t > 0.0) || replicates < 2)
    throw domain_error("q_finite_mc: bad arguments");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(t));
  double power = k + 0.5 * (theta - 1.0);
  detail::welford re, im;
  for (std::int64_t i = 0; i < replicates; ++i) {
    double x = normal(rng);
    std::complex<double> z(std::cos(x), std::sin(x));
    std::complex<double> zp(std::cos(power * x), std::sin(power * x));
    std::complex<double> val;
    if (k == n) {
      // the hypergeometric factor is (1-Z)^{-1} here and cancels 1-Z
      val = zp;
    } else {
      val = zp * (1.0 - z) *
            hyp2f1_terminating(-(n - k - 1), 2.0 * k + theta, n + k + theta, z);
    }
    re.add(val.real());
    im.add(val.imag());
  }
  double pref = std::exp(std::lgamma(n + theta) + std::lgamma(2.0 * k + theta) -
                         std::lgamma(k + theta) - std::lgamma(n + k + theta) +
                         log_binom(n, k) + (theta - 1.0) * (theta - 1.0) * t / 8.0);
  mc_complex_estimate out;
  out.real_part = {pref * re.mean, pref * re.se(), replicates, seed};
  out.imag_part = {pref * im.mean, pref * im.se(), replicates, seed};
  return out;
}

/// Two-dimensional dual death process: the total count follows q_{|m||l|}(t)
/// and surviving labels are a hypergeometric sample,
///   P(L(t) = l | L(0) = m) = q_{|m||l|}(t) C(m1,l1) C(m2,l2) / C(|m|,|l|).
inline double dual2d_transition(std::array<int, 2> m, std::array<int, 2> l,
                                const model_params& p, double t) {
  if (l[0] > m[0] || l[1] > m[1] || l[0] < 0 || l[1] < 0)
    throw domain_error("dual2d_transition: need l <= m componentwise");
  int msum = m[0] + m[1], lsum = l[0] + l[1];
  if (msum == 0) return (lsum == 0) ? 1.0 : 0.0;
  double q = (lsum == msum && t == 0.0) ? 1.0 : q_finite(msum, lsum, p.theta(), t);
  double lw = log_binom(m[0], l[0]) + log_binom(m[1], l[1]) - log_binom(msum, lsum);
  return q * std::exp(lw);
}

/// Death rates of the two-dimensional dual: k -> k - e_i at rate
/// k_i (|k| + theta - 1) / 2.
inline std::vector<std::pair<std::array<int, 2>, double>> g_dual_rates(
    std::array<int, 2> k, const model_params& p) {
  if (k[0] < 0 || k[1] < 0 || k[0] + k[1] < 1)
    throw domain_error("g_dual_rates: need |k| >= 1");
  double total = k[0] + k[1] + p.theta() - 1.0;
  std::vector<std::pair<std::array<int, 2>, double>> out;
  if (k[0] > 0) out.push_back({{k[0] - 1, k[1]}, 0.5 * k[0] * total});
  if (k[1] > 0) out.push_back({{k[0], k[1] - 1}, 0.5 * k[1] * total});
  return out;
}

/// Exact right-hand side of the moment duality: for m = (m1, m2),
///   E_x[ C(|m|, m1) X(t)^{m1} (1-X(t))^{m2} ]
///     = C(|m|, m1) (alpha)_(m1) (beta)_(m2) / (theta)_(|m|)
///       * sum_{l <= m} x^{l1} (1-x)^{l2} (theta)_(|l|)/((alpha)_(l1)(beta)_(l2))
///         q_{|m||l|}(t) C(|l|, l1) m1_[l1] m2_[l2] / |m|_[|l|].
inline double duality_rhs(std::array<int, 2> m, double x, const model_params& p,
                          double t) {
  p.require_stationary();
  if (m[0] < 0 || m[1] < 0) throw domain_error("duality_rhs: m must be nonnegative");
  int msum = m[0] + m[1];
  if (msum == 0) return 1.0;
  double theta = p.theta();
  kahan_accumulator acc;
  for (int l1 = 0; l1 <= m[0]; ++l1) {
    for (int l2 = 0; l2 <= m[1]; ++l2) {
      int lsum = l1 + l2;
      double q = (t == 0.0) ? (lsum == msum ? 1.0 : 0.0)
                            : q_finite(msum, lsum, theta, t);
      if (q == 0.0) continue;
      double lg = l1 * std::log(x) + l2 * std::log1p(-x) +
                  log_rising_pos(theta, lsum) - log_rising_pos(p.alpha, l1) -
                  log_rising_pos(p.beta, l2) + log_binom(lsum, l1) +
                  std::lgamma(m[0] + 1.0) - std::lgamma(m[0] - l1 + 1.0) +
                  std::lgamma(m[1] + 1.0) - std::lgamma(m[1] - l2 + 1.0) -
                  (std::lgamma(msum + 1.0) - std::lgamma(msum - lsum + 1.0));
      acc.add(q * std::exp(lg));
    }
  }
  double pref = std::exp(log_binom(msum, m[0]) + log_rising_pos(p.alpha, m[0]) +
                         log_rising_pos(p.beta, m[1]) - log_rising_pos(theta, msum));
  return pref * acc.sum();
}

struct duality_check_result {
  mc_estimate lhs;
  double rhs = 0.0;
};

/// Moment duality check: lhs is the Monte Carlo average of
/// C(|m|,m1) X(t)^{m1} (1-X(t))^{m2} over simulated diffusion paths supplied
/// by `simulate_terminal(x0, t, rng)`; rhs is the exact dual finite sum.
template <class Simulator>
duality_check_result duality_moment_check(std::array<int, 2> m, double x,
                                          const model_params& p, double t,
                                          std::int64_t replicates,
                                          std::uint64_t seed,
                                          Simulator&& simulate_terminal) {
  duality_check_result out;
  out.rhs = duality_rhs(m, x, p, t);
  std::mt19937_64 rng(seed);
  detail::welford w;
  double cb = std::exp(log_binom(m[0] + m[1], m[0]));
  for (std::int64_t i = 0; i < replicates; ++i) {
    double xt = simulate_terminal(x, t, rng);
    w.add(cb * std::pow(xt, m[0]) * std::pow(1.0 - xt, m[1]));
  }
  out.lhs = {w.mean, w.se(), replicates, seed};
  return out;
}

}  // namespace cdl
