#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "special.hpp"
#include "types.hpp"

namespace cdl {

/// Gauss-Jacobi rule on (0,1) with respect to the Beta(alpha, beta)
/// probability measure. Nodes are strictly increasing, weights sum to 1,
/// and polynomials of degree <= 2m-1 are integrated exactly.
struct quadrature_rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  double integrate(const std::function<double(double)>& f) const {
    kahan_accumulator acc;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc.add(weights[i] * f(nodes[i]));
    return acc.sum();
  }
};

/// Golub-Welsch on the monic Jacobi recurrence for the weight
/// (1-u)^(beta-1) (1+u)^(alpha-1) on [-1,1], mapped to y = (1+u)/2.
inline quadrature_rule gauss_jacobi(int m, const model_params& p) {
  if (m < 1) throw domain_error("gauss_jacobi: need at least one node");
  p.require_stationary();
  const double a = p.beta - 1.0, b = p.alpha - 1.0;
  const double ab = a + b;

  Eigen::VectorXd diag(m), sub(m > 1 ? m - 1 : 1);
  for (int k = 0; k < m; ++k) {
    if (k == 0) {
      diag(0) = (b - a) / (ab + 2.0);
    } else {
      double d = 2.0 * k + ab;
      diag(k) = (b * b - a * a) / (d * (d + 2.0));
    }
  }
  for (int k = 1; k < m; ++k) {
    double d = 2.0 * k + ab;
    double num = 4.0 * k * (k + a) * (k + b);
    double den = d * d * (d + 1.0);
    // (k+ab)/(d-1) is exactly 1 at k = 1; written out to avoid 0/0 when ab = -1.
    double ratio = (k == 1) ? 1.0 : (k + ab) / (d - 1.0);
    double bk = num / den * ratio;
    sub(k - 1) = std::sqrt(bk);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, m > 1 ? sub.head(m - 1) : Eigen::VectorXd(0),
                                Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw convergence_error("gauss_jacobi: tridiagonal eigensolver failed");

  quadrature_rule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    rule.nodes[i] = 0.5 * (1.0 + solver.eigenvalues()(i));
    double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // first-component squared; total is exactly 1
  }
  return rule;
}

}  // namespace cdl
