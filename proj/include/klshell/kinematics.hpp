#pragma once

#include "klshell/nurbs.hpp"

#include <Eigen/Dense>

#include <array>

namespace kls {

using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;

/// Local nodal positions of one element, one row per control point.
using NodalPositions = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Differential geometry of a surface at one parametric point.
struct SurfaceState {
  Vec3 a1, a2;                 ///< covariant tangents a_alpha
  std::array<Vec3, 3> da;      ///< a_{1,1}, a_{2,2}, a_{1,2}
  Vec3 n;                      ///< unit normal
  std::array<Vec3, 2> a_up;    ///< contravariant tangents a^alpha
  Mat2 a_cov, a_con;
  Mat2 b_cov, b_mix, b_con;    ///< b_ab, b^a_b, b^ab
  double Ja = 0;               ///< sqrt(det a_ab)
  double H = 0, kappa = 0;
  double Gamma[2][2][2] = {};  ///< Gamma[g][a][b] = a^g . a_{a,b}

  const Vec3& a(int alpha) const { return alpha == 0 ? a1 : a2; }
  /// a_{alpha,beta}
  const Vec3& a_d(int alpha, int beta) const { return alpha == beta ? da[alpha] : da[2]; }
};

using ReferenceState = SurfaceState;

struct SingularGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// scale: element length scale used by the degeneracy threshold 1e-12*scale^2.
SurfaceState compute_state(const BasisEval& basis, const NodalPositions& x, double scale = 1.0);

struct StrainMeasures {
  Mat2 E_cov, K_cov;
  double J = 1, I1 = 2;
};

StrainMeasures strain_measures(const ReferenceState& ref, const SurfaceState& cur);

/// Covariant second derivatives N_{;ab} = N_{,ab} - Gamma^g_ab N_{,g}; columns 11, 22, 12.
Eigen::MatrixXd covariant_hessian(const BasisEval& basis, const SurfaceState& s);

/// First-variation operators with local DOF order 3*A + i.
/// La:  columns [L11, L22, L12 + L21] with L_ab = N_{,a}^T a_b, so La^T dx = [da11/2, da22/2, da12].
/// Gn:  columns [G11, G22, 2 G12], so Gn^T dx = [db11, db22, 2 db12].
/// Ln:  columns N_{,alpha}^T n.
struct VariationBlocks {
  Eigen::MatrixXd La, Gn, Ln;
  Eigen::MatrixXd Nt;  ///< covariant Hessian (n x 3)
};

VariationBlocks variation_blocks(const BasisEval& basis, const SurfaceState& s);

/// 2x2 symmetric matrix <-> Voigt (11, 22, 12).
inline Eigen::Vector3d voigt(const Mat2& m) { return {m(0, 0), m(1, 1), m(0, 1)}; }
inline Mat2 unvoigt(const Eigen::Vector3d& v) {
  Mat2 m;
  m << v[0], v[2], v[2], v[1];
  return m;
}

}  // namespace kls
