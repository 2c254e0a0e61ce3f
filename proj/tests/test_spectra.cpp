#include <doctest.h>

#include <cdl/quadrature.hpp>
#include <cdl/spectra.hpp>

#include <cmath>

using namespace cdl;

TEST_CASE("gasper domain") {
  CHECK(gasper_domain(model_params(1.0, 2.0)));       // 1 < 2 and theta >= 2
  CHECK_FALSE(gasper_domain(model_params(0.3, 0.4))); // alpha < 1/2 and theta < 2
  CHECK_FALSE(gasper_domain(model_params(2.0, 1.0))); // alpha < beta fails
}

TEST_CASE("mixing sequences") {
  model_params p(1.0, 2.0);
  auto point1 = rho_from_mixing(12, discrete_measure({1.0}, {1.0}), p);
  for (double v : point1.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  double z0 = 0.4;
  auto pz = rho_from_mixing(12, discrete_measure({z0}, {1.0}), p);
  for (int n = 0; n <= 12; ++n)
    CHECK(pz.values[n] == doctest::Approx(n == 0 ? 1.0 : jacobi_r(n, p, z0)).epsilon(1e-12));

  // reconstructed bivariate density is nonnegative on the grid (damped scan;
  // atomic mixing laws give distributional densities whose raw truncations
  // oscillate)
  auto mix = rho_from_mixing(40, discrete_measure({0.2, 0.9}, {0.3, 0.7}), p);
  double s = scan_smoothing(40, p);
  double worst = 0.0;
  for (int gx = 1; gx < 21; ++gx)
    for (int gy = 1; gy < 21; ++gy)
      worst = std::min(worst, bivariate_ratio(mix, p, gx / 21.0, gy / 21.0, s));
  CHECK(worst > -1e-8);

  // a smooth mixing law: Z distributed as the diffusion at time t from z0.
  // Its mixture sequence is rho_n(t) R_n(z0), which decays fast enough for
  // an undamped scan.
  double zc = 0.55, t = 0.4;
  auto rule = gauss_jacobi(64, p);
  std::vector<double> masses(rule.nodes.size());
  double th = p.theta();
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    double ratio = 1.0;  // f(z0, z; t) / f_stationary(z)
    auto rz0 = jacobi_r_all(40, p, zc);
    auto rz = jacobi_r_all(40, p, rule.nodes[j]);
    for (int n = 1; n <= 40; ++n)
      ratio += std::exp(-0.5 * n * (n + th - 1.0) * t) * h_norm(n, p) * rz0[n] * rz[n];
    masses[j] = rule.weights[j] * ratio;
  }
  auto zlaw = discrete_measure(rule.nodes, masses);
  CHECK(zlaw.is_probability(1e-9));
  // renormalize the tiny quadrature defect so the constructor contract holds
  double total = zlaw.total_mass();
  for (double& m : masses) m /= total;
  auto seq = rho_from_mixing(20, discrete_measure(rule.nodes, masses), p);
  for (int n = 1; n <= 20; ++n) {
    double expect = std::exp(-0.5 * n * (n + th - 1.0) * t) * jacobi_r(n, p, zc);
    CHECK(seq.values[n] == doctest::Approx(expect).epsilon(1e-8));
  }
  double worst2 = 0.0;
  for (int gx = 1; gx < 21; ++gx)
    for (int gy = 1; gy < 21; ++gy)
      worst2 = std::min(worst2, bivariate_ratio(seq, p, gx / 21.0, gy / 21.0));
  CHECK(worst2 > -1e-8);
}

TEST_CASE("kernel_k truncation and smoothed positivity") {
  model_params p(1.0, 2.0);
  series_control one{1, 1e-12, 2};
  auto k0 = kernel_k(0.3, 0.5, 0.7, p, one, 0.5);
  CHECK(k0.truncated == doctest::Approx(1.0));  // N = 0 partial sum

  series_control ctl{20000, 1e-10, 3};
  // z = 1 reduces the summand to the two-point reproducing kernel
  auto kz1 = kernel_k(0.3, 0.5, 1.0, p, ctl, 0.95);
  CHECK(kz1.smoothed ==
        doctest::Approx(jacobi_poisson_kernel(0.95, 0.3, 0.5, p, ctl)).epsilon(1e-9));

  double worst = 0.0;
  for (double x : {0.1, 0.35, 0.65, 0.9})
    for (double y : {0.15, 0.5, 0.85})
      for (double z : {0.05, 0.45, 0.95}) {
        auto k = kernel_k(x, y, z, p, ctl, 0.95);
        worst = std::min(worst, k.smoothed);
      }
  CHECK(worst > -1e-8);
}

TEST_CASE("general spectrum d_n") {
  model_params p(1.0, 2.0);
  discrete_measure empty;
  for (int n : {0, 1, 3, 10})
    CHECK(spectrum_dn(n, 0.5, empty, p) ==
          doctest::Approx(0.5 * n * (n + p.theta() - 1.0)).epsilon(1e-13));
  // single atom at z = 0
  discrete_measure at0({0.0}, {1.0});
  CHECK(spectrum_dn(1, 0.25, at0, p) ==
        doctest::Approx(0.25 * p.theta() + 1.0 - jacobi_r(1, p, 0.0)).epsilon(1e-12));
  CHECK(spectrum_dn(0, 1.0, at0, p) == 0.0);
  // nonnegative and nondecreasing in n
  discrete_measure nu({0.0, 0.3, 0.8}, {0.5, 1.0, 0.25});
  double prev = 0.0;
  for (int n = 0; n <= 50; ++n) {
    double d = spectrum_dn(n, 0.1, nu, p);
    CHECK(d >= prev - 1e-12);
    prev = d;
  }
}

TEST_CASE("atom-at-one limit is proportional to the diffusion spectrum") {
  model_params p(2.0, 3.0);
  CHECK(dn_atom_limit(0, p) == 0.0);
  CHECK(dn_atom_limit(1, p) == doctest::Approx(p.theta() / p.beta).epsilon(1e-13));
  double c = dn_atom_limit(1, p) / p.theta();
  for (int n = 2; n <= 10; ++n) {
    double ratio = dn_atom_limit(n, p) / (n * (n + p.theta() - 1.0));
    CHECK(ratio == doctest::Approx(c).epsilon(1e-9));
  }
  // numerically confirm it is the z -> 1 limit of the spectrum integrand
  double z = 1.0 - 1e-7;
  CHECK((1.0 - jacobi_r(5, p, z)) / (1.0 - z) ==
        doctest::Approx(dn_atom_limit(5, p)).epsilon(1e-5));
}

TEST_CASE("compound-Poisson spectrum") {
  model_params p(1.0, 1.0);
  CHECK(poisson_dn(0, 2.0, discrete_measure({0.3}, {1.0}), p) == 0.0);
  // atoms at 1 contribute nothing since R_n(1) = 1
  for (int n : {1, 4, 9})
    CHECK(poisson_dn(n, 3.0, discrete_measure({1.0}, {1.0}), p) ==
          doctest::Approx(0.0).epsilon(1e-12));
  // R_1(0) = -1 for alpha = beta = 1, so d_1 = lambda (1 - (-1)) = 4
  CHECK(poisson_dn(1, 2.0, discrete_measure({0.0}, {1.0}), p) ==
        doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("bochner consistency checks") {
  model_params p(1.0, 2.0);
  discrete_measure nu({0.0, 0.5}, {0.4, 0.8});
  int nmax = 30;
  std::vector<double> tgrid = {0.1, 0.4, 0.9};

  auto exp_spectrum = [&](double t) {
    correlation_sequence c;
    c.origin = correlation_sequence::origin_tag::spectrum;
    c.values.resize(nmax + 1);
    for (int n = 0; n <= nmax; ++n)
      c.values[n] = std::exp(-spectrum_dn(n, 0.5, nu, p) * t);
    return c;
  };
  CHECK(bochner_consistency(exp_spectrum, tgrid, p).all_ok());

  // constant-rate spectrum: c_n(t) = e^{-t} for n >= 1 still forms a semigroup
  auto const_rate = [&](double t) {
    correlation_sequence c;
    c.values.assign(nmax + 1, std::exp(-t));
    c.values[0] = 1.0;
    return c;
  };
  CHECK(bochner_consistency(const_rate, tgrid, p).all_ok());

  // c_n(t) = 1 + t violates the boundary and semigroup conditions
  auto bad = [&](double t) {
    correlation_sequence c;
    c.values.assign(nmax + 1, 1.0 + t);
    return c;
  };
  auto rep = bochner_consistency(bad, tgrid, p);
  CHECK_FALSE(rep.all_ok());
  CHECK_FALSE(rep.boundary_ok);  // c_0(t) = 1 + t != 1
  CHECK_FALSE(rep.semigroup_ok);
}

TEST_CASE("jacobi-poisson kernel") {
  model_params p(1.0, 2.0);
  CHECK(jacobi_poisson_kernel(0.0, 0.2, 0.9, p) == 1.0);
  // integrates to 1 in y: orthogonality kills every n >= 1 term
  auto rule = gauss_jacobi(64, p);
  for (double r : {0.3, 0.8}) {
    double mass = rule.integrate(
        [&](double y) { return jacobi_poisson_kernel(r, 0.35, y, p); });
    CHECK(std::abs(mass - 1.0) < 1e-10);
  }
  // positivity scan over the stated grid
  for (auto pp : {model_params(0.5, 0.5), model_params(1.0, 2.0), model_params(3.0, 3.0)}) {
    double worst = 1.0;
    for (double r : {0.3, 0.7, 0.95})
      for (int gx = 1; gx <= 19; ++gx)
        for (int gy = 1; gy <= 19; ++gy)
          worst = std::min(worst,
                           jacobi_poisson_kernel(r, 0.05 * gx, 0.05 * gy, pp));
    CHECK(worst >= -1e-10);
  }
}

TEST_CASE("bilinear double series matches the single classical series") {
  series_control ctl{40000, 1e-13, 3};
  for (auto [ae, be] : {std::pair{0.0, 0.0}, std::pair{1.0, 0.25}, std::pair{0.5, 1.5}}) {
    for (double r : {0.3, 0.5}) {
      for (auto [phi, psi] : {std::pair{0.785398163397448, 0.785398163397448},
                              std::pair{0.6, 1.1}}) {
        double rhs = jacobi_poisson_bilinear(r, phi, psi, ae, be, ctl);
        double lhs = jacobi_poisson_classical_series(r, std::cos(2 * phi),
                                                     std::cos(2 * psi), ae, be);
        CHECK(std::abs(lhs - rhs) < 1e-8);
      }
    }
  }
  // classical positivity on a grid
  for (double r : {0.4, 0.9}) {
    for (double phi : {0.2, 0.7, 1.3})
      for (double psi : {0.3, 0.9, 1.4})
        CHECK(jacobi_poisson_bilinear(r, phi, psi, 0.0, 0.0, ctl) > 0.0);
  }
}

TEST_CASE("jacobi-poisson kernel matches the bilinear oracle after rescaling") {
  // P~_n(x) = c_n P_n^(beta-1,alpha-1)(2x-1) gives
  // kernel(r,x,y) = 2^{theta-1} B(alpha,beta) * bilinear series at
  // exponents (beta-1, alpha-1) and angles with cos 2phi = 2x-1.
  series_control ctl{40000, 1e-13, 3};
  for (auto p : {model_params(1.0, 2.0), model_params(0.75, 0.75)}) {
    double r = 0.5;
    for (double x : {0.3, 0.62}) {
      for (double y : {0.41, 0.8}) {
        double phi = 0.5 * std::acos(2.0 * x - 1.0);
        double psi = 0.5 * std::acos(2.0 * y - 1.0);
        double scale = std::pow(2.0, p.theta() - 1.0) *
                       std::exp(log_beta_fn(p.alpha, p.beta));
        double via_f4 =
            scale * jacobi_poisson_bilinear(r, phi, psi, p.beta - 1.0, p.alpha - 1.0, ctl);
        CHECK(std::abs(jacobi_poisson_kernel(r, x, y, p, ctl) - via_f4) < 1e-8);
      }
    }
  }
}

TEST_CASE("complete monotonicity probe") {
  model_params p(1.0, 2.0);
  std::vector<double> grid(24);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.05 + 0.1 * i;

  // Vieta identities for the factorization roots
  for (double lam : grid) {
    CHECK(cm_r1(lam, p.theta()) * cm_r2(lam, p.theta()) ==
          doctest::Approx(-2.0 * lam).epsilon(1e-12));
    CHECK(cm_r1(lam, p.theta()) + cm_r2(lam, p.theta()) ==
          doctest::Approx(p.theta() - 1.0).epsilon(1e-12));
  }

  // empty measure: identically zero, trivially passes
  auto rep0 = cm_probe(grid, discrete_measure{}, p);
  CHECK(rep0.pass);
  for (double v : rep0.values) CHECK(v == 0.0);

  // genuine subordination spectra pass the probe
  auto rep = cm_probe(grid, discrete_measure({0.2, 0.6}, {0.5, 0.5}), p);
  CHECK(rep.pass);

  // single atom at y = 0 evaluates through the Gauss summation value
  model_params psmall(0.5, 2.0);  // needs alpha < 1 for convergence at w = 1
  auto rep1 = cm_probe(grid, discrete_measure({0.0}, {1.0}), psmall);
  CHECK(rep1.values[0] != 0.0);
  double lam0 = 0.05;
  double direct = -(hyp2f1_at_one(cm_r1(lam0, psmall.theta()), cm_r2(lam0, psmall.theta()),
                                  psmall.beta) -
                    1.0);
  CHECK(rep1.values[0] == doctest::Approx(direct).epsilon(1e-10));
}
