#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"

namespace cdl {

/// Mutation parameters of the two-type model. theta = alpha + beta is the
/// total mutation rate; the stationary law, when it exists, is Beta(alpha, beta).
struct model_params {
  double alpha;
  double beta;

  model_params(double a, double b) : alpha(a), beta(b) {
    if (!(a >= 0.0) || !(b >= 0.0))
      throw domain_error("model_params: alpha and beta must be nonnegative");
  }

  double theta() const { return alpha + beta; }

  /// Operations that integrate against the stationary density need both
  /// parameters strictly positive.
  void require_stationary() const {
    if (alpha <= 0.0 || beta <= 0.0)
      throw domain_error("operation requires alpha > 0 and beta > 0");
  }
};

/// Parent-independent mutation rates of the d-type model; theta = sum eps_i.
struct dirichlet_params {
  std::vector<double> eps;

  explicit dirichlet_params(std::vector<double> e) : eps(std::move(e)) {
    if (eps.size() < 2) throw domain_error("dirichlet_params: need d >= 2 types");
    for (double v : eps)
      if (!(v >= 0.0)) throw domain_error("dirichlet_params: eps_i must be nonnegative");
  }

  int d() const { return static_cast<int>(eps.size()); }
  double theta() const { return std::accumulate(eps.begin(), eps.end(), 0.0); }
  bool all_positive() const {
    for (double v : eps)
      if (v <= 0.0) return false;
    return true;
  }
};

/// Truncation policy for infinite series.
struct series_control {
  int max_terms = 10000;
  double tail_tol = 1e-12;
  int consecutive_small = 3;  // stop after this many successive terms below tail_tol

  void validate() const {
    if (max_terms < 1 || !(tail_tol > 0.0) || consecutive_small < 2)
      throw domain_error("series_control: invalid truncation policy");
  }
};

/// A truncated density evaluation together with its truncation diagnostics.
/// `clipped` marks a small negative raw value (a truncation artifact near the
/// boundary) that was clamped to zero.
struct density_value {
  double value = 0.0;
  int truncation_order = 0;
  double last_term_magnitude = 0.0;
  bool clipped = false;
};

/// Finite probability vector over {0, 1, ..., n}; norm_defect records |1 - sum|
/// before any rescaling. Entries more negative than -1e-12 are rejected,
/// tiny negatives are zeroed.
struct prob_vector {
  std::vector<double> probs;
  double norm_defect = 0.0;
};

inline prob_vector make_prob_vector(std::vector<double> p) {
  double total = 0.0;
  for (double& v : p) {
    if (v < 0.0) {
      if (v < -1e-12) throw domain_error("prob_vector: entry below -1e-12");
      v = 0.0;
    }
    total += v;
  }
  return prob_vector{std::move(p), std::abs(1.0 - total)};
}

/// Monte Carlo estimate with its standard error (sample sd / sqrt(replicates)).
struct mc_estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t replicates = 0;
  std::uint64_t seed = 0;
};

/// Real and imaginary parts of a complex-functional Monte Carlo average.
/// The imaginary part is a diagnostic; the target quantity is real.
struct mc_complex_estimate {
  mc_estimate real_part;
  mc_estimate imag_part;
};

/// Finite discrete measure as (atom, mass) pairs. Continuous measures enter
/// the library through user-supplied discretizations of this form.
struct discrete_measure {
  std::vector<double> atoms;
  std::vector<double> masses;

  discrete_measure() = default;
  discrete_measure(std::vector<double> a, std::vector<double> m)
      : atoms(std::move(a)), masses(std::move(m)) {
    if (atoms.size() != masses.size())
      throw domain_error("discrete_measure: atoms/masses length mismatch");
    for (double v : masses)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw domain_error("discrete_measure: masses must be finite and nonnegative");
  }

  std::size_t size() const { return atoms.size(); }
  double total_mass() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }
  bool is_probability(double tol = 1e-12) const { return std::abs(total_mass() - 1.0) <= tol; }
};

/// An edge/lineage count that may take the entrance-boundary value infinity.
class extended_count {
 public:
  extended_count(int n) : n_(n) {  // NOLINT: implicit by design
    if (n < 0) throw domain_error("extended_count: negative count");
  }
  static extended_count infinity() { return extended_count(infinite_tag{}); }

  bool is_infinite() const { return infinite_; }
  int value() const {
    if (infinite_) throw domain_error("extended_count: infinite value has no integer");
    return n_;
  }

 private:
  struct infinite_tag {};
  explicit extended_count(infinite_tag) : n_(0), infinite_(true) {}
  int n_ = 0;
  bool infinite_ = false;
};

}  // namespace cdl
