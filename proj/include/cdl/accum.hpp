#pragma once

#include <cmath>
#include <limits>

namespace cdl {

/// Kahan compensated accumulator.
class kahan_accumulator {
 public:
  void add(double x) {
    double y = x - carry_;
    double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double sum() const { return sum_; }
  void reset() { sum_ = 0.0; carry_ = 0.0; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Value stored as log|x| plus a sign in {-1, 0, +1}.
struct signed_log {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 0;

  static signed_log zero() { return {}; }
  static signed_log one() { return {0.0, 1}; }

  static signed_log from(double x) {
    if (x == 0.0) return zero();
    return {std::log(std::abs(x)), x > 0 ? 1 : -1};
  }

  double to_double() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

  friend signed_log operator*(const signed_log& a, const signed_log& b) {
    if (a.sign == 0 || b.sign == 0) return zero();
    return {a.log_abs + b.log_abs, a.sign * b.sign};
  }
  friend signed_log operator/(const signed_log& a, const signed_log& b) {
    if (a.sign == 0) return zero();
    return {a.log_abs - b.log_abs, a.sign * b.sign};
  }
};

}  // namespace cdl
