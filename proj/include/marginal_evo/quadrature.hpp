#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "marginal_evo/errors.hpp"

namespace marginal_evo {

/// Gauss-Hermite rule for the standard normal weight: sum_i w_i f(x_i)
/// approximates E[f(Z)], Z ~ N(0, 1). The weights sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <typename F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
/// probabilists' Hermite recurrence (zero diagonal, off-diagonal sqrt(k)),
/// weights are the squared first components of its eigenvectors.
inline GaussHermiteRule gauss_hermite_rule(int order) {
  if (order < 1) throw InvalidParameter("Gauss-Hermite order must be >= 1");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order > 1 ? order - 1 : 0);
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw EigenFailure("Golub-Welsch eigenproblem failed");

  GaussHermiteRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
  }
  return rule;
}

}  // namespace marginal_evo
