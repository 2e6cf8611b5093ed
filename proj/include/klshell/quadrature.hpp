#pragma once

#include <vector>

namespace kls {

struct GaussRule {
  std::vector<double> x, w;  ///< points and weights on [-1, 1]
};

/// Gauss-Legendre rule with n points (Golub-Welsch).
GaussRule gauss_legendre(int n);

/// Rule mapped to [a, b].
GaussRule gauss_legendre(int n, double a, double b);

}  // namespace kls
