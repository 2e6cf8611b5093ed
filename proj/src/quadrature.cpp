#include "klshell/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace kls {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    g.x[i] = es.eigenvalues()[i];
    g.w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
  return g;
}

GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule g = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    g.x[i] = 0.5 * (a + b) + 0.5 * (b - a) * g.x[i];
    g.w[i] *= 0.5 * (b - a);
  }
  return g;
}

}  // namespace kls
