#pragma once

#include <Eigen/Dense>

#include <random>

namespace kls::test {

inline std::mt19937& rng() {
  static std::mt19937 g(20240531u);
  return g;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

}  // namespace kls::test
