#include "klshell/kinematics.hpp"

namespace kls {

SurfaceState compute_state(const BasisEval& basis, const NodalPositions& x, double scale) {
  SurfaceState s;
  s.a1 = x.transpose() * basis.dN.col(0);
  s.a2 = x.transpose() * basis.dN.col(1);
  for (int k = 0; k < 3; ++k) s.da[k] = x.transpose() * basis.ddN.col(k);
  const Vec3 c = s.a1.cross(s.a2);
  const double cn = c.norm();
  if (!(cn > 1e-12 * scale * scale)) throw SingularGeometry("degenerate tangent plane");
  s.n = c / cn;
  s.a_cov << s.a1.dot(s.a1), s.a1.dot(s.a2), s.a2.dot(s.a1), s.a2.dot(s.a2);
  s.a_con = s.a_cov.inverse();
  s.Ja = cn;
  s.a_up[0] = s.a_con(0, 0) * s.a1 + s.a_con(0, 1) * s.a2;
  s.a_up[1] = s.a_con(1, 0) * s.a1 + s.a_con(1, 1) * s.a2;
  s.b_cov << s.n.dot(s.da[0]), s.n.dot(s.da[2]), s.n.dot(s.da[2]), s.n.dot(s.da[1]);
  s.b_mix = s.a_con * s.b_cov;
  s.b_con = s.a_con * s.b_cov * s.a_con;
  s.H = 0.5 * s.b_mix.trace();
  s.kappa = s.b_cov.determinant() / s.a_cov.determinant();
  for (int g = 0; g < 2; ++g)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) s.Gamma[g][a][b] = s.a_up[g].dot(s.a_d(a, b));
  return s;
}

StrainMeasures strain_measures(const ReferenceState& ref, const SurfaceState& cur) {
  StrainMeasures m;
  m.E_cov = 0.5 * (cur.a_cov - ref.a_cov);
  m.K_cov = cur.b_cov - ref.b_cov;
  m.J = std::sqrt(cur.a_cov.determinant() / ref.a_cov.determinant());
  m.I1 = (ref.a_con.cwiseProduct(cur.a_cov)).sum();
  return m;
}

Eigen::MatrixXd covariant_hessian(const BasisEval& basis, const SurfaceState& s) {
  Eigen::MatrixXd Nt = basis.ddN;
  const int ab[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  for (int k = 0; k < 3; ++k)
    for (int g = 0; g < 2; ++g) Nt.col(k) -= s.Gamma[g][ab[k][0]][ab[k][1]] * basis.dN.col(g);
  return Nt;
}

VariationBlocks variation_blocks(const BasisEval& basis, const SurfaceState& s) {
  const int n = static_cast<int>(basis.N.size());
  VariationBlocks v;
  v.Nt = covariant_hessian(basis, s);
  v.La.resize(3 * n, 3);
  v.Gn.resize(3 * n, 3);
  v.Ln.resize(3 * n, 2);
  for (int A = 0; A < n; ++A) {
    const double N1 = basis.dN(A, 0), N2 = basis.dN(A, 1);
    v.La.block<3, 1>(3 * A, 0) = N1 * s.a1;
    v.La.block<3, 1>(3 * A, 1) = N2 * s.a2;
    v.La.block<3, 1>(3 * A, 2) = N1 * s.a2 + N2 * s.a1;
    v.Gn.block<3, 1>(3 * A, 0) = v.Nt(A, 0) * s.n;
    v.Gn.block<3, 1>(3 * A, 1) = v.Nt(A, 1) * s.n;
    v.Gn.block<3, 1>(3 * A, 2) = 2.0 * v.Nt(A, 2) * s.n;
    v.Ln.block<3, 1>(3 * A, 0) = N1 * s.n;
    v.Ln.block<3, 1>(3 * A, 1) = N2 * s.n;
  }
  return v;
}

}  // namespace kls
