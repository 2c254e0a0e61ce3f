#include <doctest.h>

#include <cdl/quadrature.hpp>
#include <cdl/special.hpp>

#include <cmath>
#include <random>
#include <mpfr.h>

using namespace cdl;

TEST_CASE("log_rising basics") {
  CHECK(log_rising(2.0, 0).to_double() == 1.0);                 // empty product
  CHECK(log_rising(2.0, 3).to_double() == doctest::Approx(24.0).epsilon(1e-14));
  CHECK(log_rising(0.5, 2).to_double() == doctest::Approx(0.75).epsilon(1e-14));
  // sign tracking through negative factors
  CHECK(log_rising(-2.5, 2).to_double() == doctest::Approx((-2.5) * (-1.5)).epsilon(1e-13));
  CHECK(log_rising(-2.5, 3).to_double() == doctest::Approx((-2.5) * (-1.5) * (-0.5)).epsilon(1e-13));
  CHECK(log_rising(-2.5, 4).to_double() == doctest::Approx((-2.5) * (-1.5) * (-0.5) * 0.5).epsilon(1e-13));
  CHECK(log_rising(-2.0, 3).sign == 0);  // factor hits zero exactly
  CHECK(log_rising(-3.0, 2).to_double() == doctest::Approx(6.0).epsilon(1e-13));
}

TEST_CASE("terminating 2F1") {
  CHECK(hyp2f1_terminating(0, 3.7, 1.2, 0.8) == 1.0);  // empty tail
  // two-term hand sum: 1 + (-1)(2)/(1) * 0.5
  CHECK(hyp2f1_terminating(-1, 2.0, 1.0, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  // three-term hand sum at z = 1: 1 - 3 + (-2)(-1)(3)(4)/((2)(3) 2!) = 1 - 3 + 2
  double brute = 1.0 + (-2.0) * 3.0 / (2.0 * 1.0) * 1.0 +
                 ((-2.0) * (-1.0)) * (3.0 * 4.0) / ((2.0 * 3.0) * 2.0) * 1.0;
  CHECK(hyp2f1_terminating(-2, 3.0, 2.0, 1.0) == doctest::Approx(brute).epsilon(1e-14));
  CHECK_THROWS_AS(hyp2f1_terminating(-5, 1.0, -2.0, 0.3), pole_error);
  // complex argument degenerates to the real sum on the real axis
  std::complex<double> zc(0.4, 0.0);
  CHECK(hyp2f1_terminating(-4, 1.5, 2.5, zc).real() ==
        doctest::Approx(hyp2f1_terminating(-4, 1.5, 2.5, 0.4)).epsilon(1e-13));
  CHECK(hyp2f1_terminating(-4, 1.5, 2.5, zc).imag() == doctest::Approx(0.0));
}

TEST_CASE("jacobi_r normalization and hand values") {
  model_params p(1.0, 1.0);
  CHECK(jacobi_r(0, p, 0.37) == 1.0);
  for (int n : {1, 2, 5, 17, 50}) {
    CHECK(jacobi_r(n, p, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(jacobi_r(n, model_params(2.0, 3.0), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(jacobi_r(n, model_params(0.25, 7.5), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // n=1, alpha=beta=1: 1 - (theta/beta)(1-0) = -1
  CHECK(jacobi_r(1, p, 0.0) == doctest::Approx(-1.0).epsilon(1e-14));
}

namespace {

// High-precision terminating 2F1 by ratio recurrence. The alternating sum
// cancels up to ~37 digits by n = 50 near x = 0 for small parameters, so the
// oracle side of the cross-check runs at 256 bits.
double hyp2f1_terminating_mp(int neg_n, double b, double c, double z) {
  const mpfr_prec_t prec = 256;
  mpfr_t sum, term, num, den;
  mpfr_inits2(prec, sum, term, num, den, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_d(sum, 1.0, MPFR_RNDN);
  mpfr_set_d(term, 1.0, MPFR_RNDN);
  for (int k = 0; k < -neg_n; ++k) {
    mpfr_set_d(num, b, MPFR_RNDN);
    mpfr_add_si(num, num, k, MPFR_RNDN);
    mpfr_mul_si(num, num, neg_n + k, MPFR_RNDN);
    mpfr_mul_d(num, num, z, MPFR_RNDN);
    mpfr_set_d(den, c, MPFR_RNDN);
    mpfr_add_si(den, den, k, MPFR_RNDN);
    mpfr_mul_si(den, den, k + 1, MPFR_RNDN);
    mpfr_mul(term, term, num, MPFR_RNDN);
    mpfr_div(term, term, den, MPFR_RNDN);
    mpfr_add(sum, sum, term, MPFR_RNDN);
  }
  double out = mpfr_get_d(sum, MPFR_RNDN);
  mpfr_clears(sum, term, num, den, static_cast<mpfr_ptr>(nullptr));
  return out;
}

}  // namespace

TEST_CASE("recurrence path agrees with terminating 2F1 path") {
  // independent evaluation routes, relative 1e-11 for n <= 50
  std::vector<model_params> params = {model_params(0.25, 0.25), model_params(1.0, 2.0),
                                      model_params(10.0, 0.5), model_params(4.0, 10.0)};
  for (const auto& p : params) {
    double theta = p.theta();
    for (int n = 0; n <= 50; n += (n < 8 ? 1 : 7)) {
      for (int g = 0; g <= 20; ++g) {
        double x = g / 20.0;
        double via_rec = jacobi_r(n, p, x);
        double via_2f1 = hyp2f1_terminating_mp(-n, n + theta - 1.0, p.beta, 1.0 - x);
        double scale = std::max({1.0, std::abs(via_rec), std::abs(via_2f1)});
        CHECK(std::abs(via_rec - via_2f1) / scale < 1e-11);
      }
    }
  }
  // the double-precision sum itself is trustworthy at small degree; beyond
  // that its accuracy degrades as max_term * eps and the recurrence is the
  // production path
  model_params p(2.0, 3.0);
  for (int n = 0; n <= 8; ++n)
    for (double x : {0.1, 0.5, 0.9}) {
      double diff = std::abs(jacobi_r(n, p, x) -
                             hyp2f1_terminating(-n, n + p.theta() - 1.0, p.beta, 1.0 - x));
      CHECK(diff < 1e-10);
    }
}

TEST_CASE("jacobi_r_all matches pointwise evaluation") {
  model_params p(2.0, 3.0);
  auto all = jacobi_r_all(30, p, 0.42);
  for (int n = 0; n <= 30; n += 5)
    CHECK(all[n] == doctest::Approx(jacobi_r(n, p, 0.42)).epsilon(1e-13));
}

TEST_CASE("h_norm closed form vs quadrature of E[R_n^2]") {
  // h_n is the reciprocal of E[R_n^2]; hand value at n=1, alpha=beta=1 is
  // (theta+1) beta/alpha = 3.
  model_params p11(1.0, 1.0);
  CHECK(h_norm(0, p11) == 1.0);
  CHECK(h_norm(1, p11) == doctest::Approx(3.0).epsilon(1e-13));
  model_params p23(2.0, 3.0);
  auto rule = gauss_jacobi(64, p23);
  for (int n : {1, 2, 5, 9}) {
    double mean_sq = rule.integrate([&](double y) {
      double r = jacobi_r(n, p23, y);
      return r * r;
    });
    CHECK(h_norm(n, p23) * mean_sq == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("orthonormality under Gauss-Jacobi quadrature") {
  for (auto p : {model_params(1.0, 1.0), model_params(2.0, 3.0), model_params(0.5, 0.5)}) {
    auto rule = gauss_jacobi(64, p);
    double d33 = rule.integrate([&](double y) {
      double v = jacobi_orthonormal(3, p, y);
      return v * v;
    });
    CHECK(d33 == doctest::Approx(1.0).epsilon(1e-10));
    double d25 = rule.integrate(
        [&](double y) { return jacobi_orthonormal(2, p, y) * jacobi_orthonormal(5, p, y); });
    CHECK(std::abs(d25) < 1e-10);
  }
  CHECK(jacobi_orthonormal(0, model_params(2.0, 3.0), 0.3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(jacobi_orthonormal(1, model_params(0.0, 1.0), 0.3), domain_error);
}

TEST_CASE("scaling constant between orthonormal and classical polynomials") {
  // P~_n(x) = c_n P_n^(beta-1,alpha-1)(2x-1) with c_n^2 = h_n (n!/(beta)_n)^2.
  model_params p(1.7, 0.6);
  for (int n : {1, 2, 4, 8}) {
    double cn2 = h_norm(n, p) *
                 std::exp(2.0 * (std::lgamma(n + 1.0) - log_rising_pos(p.beta, n)));
    double x = 0.31;
    double lhs = jacobi_orthonormal(n, p, x);
    double rhs = std::sqrt(cn2) * jacobi_p_classical(n, p.beta - 1.0, p.alpha - 1.0, 2.0 * x - 1.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
}

TEST_CASE("beta and dirichlet densities") {
  CHECK(beta_density(model_params(1.0, 1.0), 0.3) == doctest::Approx(1.0));
  CHECK(beta_density(model_params(2.0, 1.0), 0.5) == doctest::Approx(1.0));  // 2y at y=0.5
  CHECK_THROWS_AS(beta_density(model_params(1.0, 1.0), 0.0), domain_error);
  CHECK_THROWS_AS(beta_density(model_params(0.0, 1.0), 0.5), domain_error);

  dirichlet_params dp({1.0, 1.0, 1.0});
  std::vector<double> x = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(dirichlet_density(dp, x) == doctest::Approx(2.0).epsilon(1e-13));
  std::vector<double> bad = {0.0, 0.5, 0.5};
  CHECK_THROWS_AS(dirichlet_density(dp, bad), domain_error);
}

TEST_CASE("gauss_jacobi moments") {
  model_params p(2.0, 3.0);
  auto rule = gauss_jacobi(64, p);
  double wsum = 0.0;
  for (double w : rule.weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < rule.nodes.size(); ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
  CHECK(rule.integrate([](double y) { return y; }) == doctest::Approx(0.4).epsilon(1e-12));
  // degree 2m-1 monomial against the log-Beta-ratio moment formula
  int m = 6;
  auto small = gauss_jacobi(m, p);
  int deg = 2 * m - 1;
  double exact = std::exp(log_beta_fn(p.alpha + deg, p.beta) - log_beta_fn(p.alpha, p.beta));
  double got = small.integrate([&](double y) { return std::pow(y, deg); });
  CHECK(got == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("non-terminating 2F1 and the Gauss summation value") {
  // 2F1(a,b;c;z) = (1-z)^(-a) when b = c
  CHECK(hyp2f1_series(0.7, 2.2, 2.2, 0.3) == doctest::Approx(std::pow(0.7, -0.7)).epsilon(1e-12));
  double a = 0.4, b = -0.9, c = 2.0;
  double gauss = hyp2f1_at_one(a, b, c);
  // compare against the series pushed close to 1
  double near = hyp2f1_series(a, b, c, 0.999);
  CHECK(std::abs(gauss - near) < 5e-3);
  CHECK_THROWS_AS(hyp2f1_at_one(2.0, 3.0, 1.0), non_terminating_series);
}
