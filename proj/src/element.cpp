#include "klshell/element.hpp"

#include "klshell/quadrature.hpp"

#include <cmath>

namespace kls {

namespace {

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// K(3A+i, 3B+j) += S(A, B) * M(i, j)
void add_kron(Eigen::MatrixXd& K, const Eigen::MatrixXd& S, const Eigen::Matrix3d& M) {
  for (int A = 0; A < S.rows(); ++A)
    for (int B = 0; B < S.cols(); ++B) K.block<3, 3>(3 * A, 3 * B) += S(A, B) * M;
}

void scatter(const std::vector<int>& nodes, const Eigen::VectorXd& fe, const Eigen::MatrixXd* Ke, ExternalForce& out) {
  const int n = static_cast<int>(nodes.size());
  for (int A = 0; A < n; ++A) out.f.segment<3>(3 * nodes[A]) += fe.segment<3>(3 * A);
  if (!Ke) return;
  for (int A = 0; A < n; ++A)
    for (int B = 0; B < n; ++B)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const double v = (*Ke)(3 * A + i, 3 * B + j);
          if (v != 0.0) out.K.emplace_back(3 * nodes[A] + i, 3 * nodes[B] + j, v);
        }
}

bool on_patch(const std::vector<int>& patches, int p) {
  if (patches.empty()) return true;
  for (int q : patches)
    if (q == p) return true;
  return false;
}

double profile_factor(const PressureLoad& pl, const Vec3& X) {
  if (pl.profile == PressureProfile::uniform) return 1.0;
  const Vec3 d = X - pl.origin;
  return std::sin(M_PI * d.x() / pl.Lx) * std::sin(M_PI * d.y() / pl.Ly);
}

}  // namespace

NodalPositions gather(const std::vector<int>& nodes, const Eigen::MatrixX3d& x) {
  NodalPositions out(nodes.size(), 3);
  for (size_t k = 0; k < nodes.size(); ++k) out.row(k) = x.row(nodes[k]);
  return out;
}

std::vector<ElementCache> build_element_cache(const MultiPatchMesh& mesh) {
  Eigen::MatrixX3d X(mesh.n_nodes(), 3);
  for (int i = 0; i < mesh.n_nodes(); ++i) X.row(i) = mesh.reference_positions()[i].transpose();
  std::vector<ElementCache> cache;
  cache.reserve(mesh.elements().size());
  for (size_t g = 0; g < mesh.elements().size(); ++g) {
    const MeshElement& me = mesh.elements()[g];
    const PatchBasis& pb = mesh.basis(me.patch);
    const PatchElement& pe = pb.elements()[me.local];
    const Patch& patch = mesh.patches[me.patch];
    ElementCache ec;
    ec.index = static_cast<int>(g);
    ec.patch = me.patch;
    ec.nodes = me.nodes;
    const NodalPositions Xe = gather(me.nodes, X);
    ec.scale = (Xe.colwise().maxCoeff() - Xe.colwise().minCoeff()).norm();
    const GaussRule gu = gauss_legendre(patch.ku.degree + 1, pe.u0, pe.u1);
    const GaussRule gv = gauss_legendre(patch.kv.degree + 1, pe.v0, pe.v1);
    for (size_t j = 0; j < gv.x.size(); ++j)
      for (size_t i = 0; i < gu.x.size(); ++i) {
        QuadPoint q;
        q.basis = pb.eval(me.local, gu.x[i], gv.x[j]);
        q.ref = compute_state(q.basis, Xe, ec.scale);
        q.dA = gu.w[i] * gv.w[j] * q.ref.Ja;
        ec.qp.push_back(std::move(q));
      }
    cache.push_back(std::move(ec));
  }
  return cache;
}

ElementResult internal_element(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law,
                               bool with_tangent) {
  const int n = static_cast<int>(el.nodes.size());
  ElementResult r;
  r.f = Eigen::VectorXd::Zero(3 * n);
  if (with_tangent) r.K = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  Eigen::MatrixXd S(n, n), KM2(3 * n, 3 * n);
  for (const QuadPoint& q : el.qp) {
    const SurfaceState s = compute_state(q.basis, x, el.scale);
    const MaterialResponse resp = evaluate(law, q.ref, s, with_tangent);
    const VariationBlocks vb = variation_blocks(q.basis, s);
    const Eigen::Vector3d tau = voigt(resp.stress.tau), M = voigt(resp.stress.M0);
    r.f.noalias() += q.dA * (vb.La * tau + vb.Gn * M);
    if (!with_tangent) continue;

    const TangentSet& t = resp.tangent;
    const Eigen::MatrixXd LaC = vb.La * t.C, LaD = vb.La * t.D, GnE = vb.Gn * t.E, GnF = vb.Gn * t.F;
    r.K.noalias() += q.dA * (LaC * vb.La.transpose() + LaD * vb.Gn.transpose() + GnE * vb.La.transpose() +
                             GnF * vb.Gn.transpose());
    const auto& dN = q.basis.dN;
    // k_tau
    S.noalias() = dN * resp.stress.tau * dN.transpose();
    add_kron(r.K, q.dA * S, Eigen::Matrix3d::Identity());
    // k_M1
    const double bM = resp.stress.M0.cwiseProduct(s.b_cov).sum();
    S.noalias() = dN * s.a_con * dN.transpose();
    add_kron(r.K, -q.dA * bM * S, s.n * s.n.transpose());
    // k_M2 + k_M2^T
    const Eigen::VectorXd mB = vb.Nt * M + vb.Nt.col(2) * M[2];
    KM2.setZero();
    for (int A = 0; A < n; ++A) {
      const Eigen::Matrix3d blk = s.n * (dN(A, 0) * s.a_up[0] + dN(A, 1) * s.a_up[1]).transpose();
      for (int B = 0; B < n; ++B) KM2.block<3, 3>(3 * A, 3 * B) = -mB[B] * blk;
    }
    r.K.noalias() += q.dA * (KM2 + KM2.transpose());
  }
  return r;
}

double element_energy(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law) {
  double W = 0;
  for (const QuadPoint& q : el.qp) {
    const SurfaceState s = compute_state(q.basis, x, el.scale);
    W += q.dA * strain_energy(law, SurfaceStrainInput{q.ref.a_cov, q.ref.b_cov, s.a_cov, s.b_cov});
  }
  return W;
}

TangentParts tangent_parts(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law) {
  const int n = static_cast<int>(el.nodes.size());
  TangentParts tp;
  for (auto* m : {&tp.k_tt, &tp.k_tM, &tp.k_Mt, &tp.k_MM, &tp.k_tau, &tp.k_M1, &tp.k_M2})
    *m = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (const QuadPoint& q : el.qp) {
    const SurfaceState s = compute_state(q.basis, x, el.scale);
    const MaterialResponse resp = evaluate(law, q.ref, s, true);
    const VariationBlocks vb = variation_blocks(q.basis, s);
    const TangentSet& t = resp.tangent;
    tp.k_tt += q.dA * vb.La * t.C * vb.La.transpose();
    tp.k_tM += q.dA * vb.La * t.D * vb.Gn.transpose();
    tp.k_Mt += q.dA * vb.Gn * t.E * vb.La.transpose();
    tp.k_MM += q.dA * vb.Gn * t.F * vb.Gn.transpose();
    const auto& dN = q.basis.dN;
    add_kron(tp.k_tau, q.dA * dN * resp.stress.tau * dN.transpose(), Eigen::Matrix3d::Identity());
    const double bM = resp.stress.M0.cwiseProduct(s.b_cov).sum();
    add_kron(tp.k_M1, -q.dA * bM * dN * s.a_con * dN.transpose(), s.n * s.n.transpose());
    const Eigen::Vector3d M = voigt(resp.stress.M0);
    const Eigen::VectorXd mB = vb.Nt * M + vb.Nt.col(2) * M[2];
    for (int A = 0; A < n; ++A) {
      const Eigen::Matrix3d blk = s.n * (dN(A, 0) * s.a_up[0] + dN(A, 1) * s.a_up[1]).transpose();
      for (int B = 0; B < n; ++B) tp.k_M2.block<3, 3>(3 * A, 3 * B) -= q.dA * mB[B] * blk;
    }
  }
  return tp;
}

std::vector<EdgePoint> edge_quadrature(const MultiPatchMesh& mesh, const EdgeRef& e) {
  const Patch& p = mesh.patches.at(e.patch);
  const PatchBasis& pb = mesh.basis(e.patch);
  const bool along_v = e.side == Side::u0 || e.side == Side::u1;
  const double fixed = e.side == Side::u0   ? p.ku.front()
                       : e.side == Side::u1 ? p.ku.back()
                       : e.side == Side::v0 ? p.kv.front()
                                            : p.kv.back();
  const int deg = along_v ? p.kv.degree : p.ku.degree;
  std::vector<EdgePoint> out;
  for (int g : mesh.side_elements(e)) {
    const int local = mesh.elements()[g].local;
    const PatchElement& pe = pb.elements()[local];
    const GaussRule gr = along_v ? gauss_legendre(deg + 1, pe.v0, pe.v1) : gauss_legendre(deg + 1, pe.u0, pe.u1);
    for (size_t k = 0; k < gr.x.size(); ++k) {
      EdgePoint ep;
      ep.element = g;
      ep.t = gr.x[k];
      ep.w = gr.w[k];
      ep.basis = along_v ? pb.eval(local, fixed, gr.x[k]) : pb.eval(local, gr.x[k], fixed);
      out.push_back(std::move(ep));
    }
  }
  return out;
}

void boundary_moment_point(const EdgePoint& ep, Side side, const NodalPositions& x, const NodalPositions& X,
                           double m, bool live, Eigen::VectorXd& f, Eigen::MatrixXd* K) {
  const int mi = (side == Side::u0 || side == Side::u1) ? 0 : 1, ti = 1 - mi;
  const double sgn = (side == Side::u1 || side == Side::v1) ? 1.0 : -1.0;
  const auto& dN = ep.basis.dN;
  const int n = static_cast<int>(dN.rows());
  const Vec3 a[2] = {x.transpose() * dN.col(0), x.transpose() * dN.col(1)};
  const Vec3 c = a[0].cross(a[1]);
  const double Ja = c.norm();
  const Vec3 nrm = c / Ja;
  Mat2 acov;
  acov << a[0].dot(a[0]), a[0].dot(a[1]), a[1].dot(a[0]), a[1].dot(a[1]);
  const Mat2 acon = acov.inverse();
  const Vec3 aup[2] = {acon(0, 0) * a[0] + acon(0, 1) * a[1], acon(1, 0) * a[0] + acon(1, 1) * a[1]};
  const double At = (X.transpose() * dN.col(ti)).norm();
  const double phi = live ? Ja : At / std::sqrt(acon(mi, mi));
  const double v[2] = {acon(0, mi) * phi, acon(1, mi) * phi};
  const double coef = -sgn * m * ep.w;
  for (int A = 0; A < n; ++A) f.segment<3>(3 * A) += coef * (dN(A, 0) * v[0] + dN(A, 1) * v[1]) * nrm;
  if (!K) return;
  Vec3 dphi[2], g[2][2];
  for (int gm = 0; gm < 2; ++gm) dphi[gm] = live ? Vec3(phi * aup[gm]) : Vec3(phi / acon(mi, mi) * acon(mi, gm) * aup[mi]);
  for (int al = 0; al < 2; ++al)
    for (int gm = 0; gm < 2; ++gm)
      g[al][gm] = -phi * (acon(al, gm) * aup[mi] + acon(mi, gm) * aup[al]) + acon(al, mi) * dphi[gm];
  for (int A = 0; A < n; ++A)
    for (int B = 0; B < n; ++B) {
      Eigen::Matrix3d blk = Eigen::Matrix3d::Zero();
      for (int al = 0; al < 2; ++al) {
        Eigen::Matrix3d inner = Eigen::Matrix3d::Zero();
        for (int gm = 0; gm < 2; ++gm) inner += nrm * g[al][gm].transpose() * dN(B, gm);
        inner -= v[al] * (aup[0] * dN(B, 0) + aup[1] * dN(B, 1)) * nrm.transpose();
        blk += dN(A, al) * inner;
      }
      K->block<3, 3>(3 * A, 3 * B) += coef * blk;
    }
}

ExternalForce external_forces(const MultiPatchMesh& mesh, const std::vector<ElementCache>& cache, const LoadCase& load,
                              const Eigen::MatrixX3d& x, bool with_tangent, bool dead_only) {
  ExternalForce out;
  out.f = Eigen::VectorXd::Zero(3 * mesh.n_nodes());
  Eigen::MatrixX3d X(mesh.n_nodes(), 3);
  for (int i = 0; i < mesh.n_nodes(); ++i) X.row(i) = mesh.reference_positions()[i].transpose();

  for (const auto& pl : load.pressures)
    for (const ElementCache& el : cache) {
      if (!on_patch(pl.patches, el.patch)) continue;
      const int n = static_cast<int>(el.nodes.size());
      const NodalPositions Xe = gather(el.nodes, X), xe = gather(el.nodes, x);
      Eigen::VectorXd fe = Eigen::VectorXd::Zero(3 * n);
      Eigen::MatrixXd Ke;
      const bool follower = pl.follower && !dead_only;
      const bool tang = follower && with_tangent;
      if (tang) Ke = Eigen::MatrixXd::Zero(3 * n, 3 * n);
      for (const QuadPoint& q : el.qp) {
        const Vec3 Xq = Xe.transpose() * q.basis.N;
        const double p = pl.p * profile_factor(pl, Xq);
        if (!follower) {
          for (int A = 0; A < n; ++A) fe.segment<3>(3 * A) += p * q.basis.N[A] * q.ref.n * q.dA;
          continue;
        }
        const double w = q.dA / q.ref.Ja;
        const Vec3 a1 = xe.transpose() * q.basis.dN.col(0), a2 = xe.transpose() * q.basis.dN.col(1);
        const Vec3 c = a1.cross(a2);
        for (int A = 0; A < n; ++A) fe.segment<3>(3 * A) += p * w * q.basis.N[A] * c;
        if (!tang) continue;
        const Eigen::Matrix3d s1 = skew(a1), s2 = skew(a2);
        for (int A = 0; A < n; ++A)
          for (int B = 0; B < n; ++B)
            Ke.block<3, 3>(3 * A, 3 * B) +=
                p * w * q.basis.N[A] * (q.basis.dN(B, 1) * s1 - q.basis.dN(B, 0) * s2);
      }
      scatter(el.nodes, fe, tang ? &Ke : nullptr, out);
    }

  for (const auto& sf : load.surface_forces)
    for (const ElementCache& el : cache) {
      if (!on_patch(sf.patches, el.patch)) continue;
      const int n = static_cast<int>(el.nodes.size());
      Eigen::VectorXd fe = Eigen::VectorXd::Zero(3 * n);
      for (const QuadPoint& q : el.qp)
        for (int A = 0; A < n; ++A) fe.segment<3>(3 * A) += q.basis.N[A] * sf.f0 * q.dA;
      scatter(el.nodes, fe, nullptr, out);
    }

  for (const auto& tr : load.tractions)
    for (const EdgeRef& e : tr.edges) {
      const int ti = (e.side == Side::u0 || e.side == Side::u1) ? 1 : 0;
      for (const EdgePoint& ep : edge_quadrature(mesh, e)) {
        const auto& nodes = mesh.elements()[ep.element].nodes;
        const NodalPositions Xe = gather(nodes, X);
        const double dS = (Xe.transpose() * ep.basis.dN.col(ti)).norm() * ep.w;
        Eigen::VectorXd fe = Eigen::VectorXd::Zero(3 * nodes.size());
        for (size_t A = 0; A < nodes.size(); ++A) fe.segment<3>(3 * A) = ep.basis.N[A] * tr.t * dS;
        scatter(nodes, fe, nullptr, out);
      }
    }

  for (const auto& bm : load.moments)
    for (const EdgeRef& e : bm.edges)
      for (const EdgePoint& ep : edge_quadrature(mesh, e)) {
        const auto& nodes = mesh.elements()[ep.element].nodes;
        const NodalPositions Xe = gather(nodes, X);
        const NodalPositions xe = dead_only ? Xe : gather(nodes, x);
        const int n = static_cast<int>(nodes.size());
        Eigen::VectorXd fe = Eigen::VectorXd::Zero(3 * n);
        Eigen::MatrixXd Ke;
        const bool tang = with_tangent && !dead_only;
        if (tang) Ke = Eigen::MatrixXd::Zero(3 * n, 3 * n);
        boundary_moment_point(ep, e.side, xe, Xe, bm.m, bm.live, fe, tang ? &Ke : nullptr);
        scatter(nodes, fe, tang ? &Ke : nullptr, out);
      }

  for (const auto& pt : load.points) {
    const int g = mesh.element_at(pt.patch, pt.u, pt.v);
    const auto& me = mesh.elements()[g];
    const BasisEval b = mesh.basis(pt.patch).eval(me.local, pt.u, pt.v);
    Eigen::VectorXd fe = Eigen::VectorXd::Zero(3 * me.nodes.size());
    for (size_t A = 0; A < me.nodes.size(); ++A) fe.segment<3>(3 * A) = b.N[A] * pt.F;
    scatter(me.nodes, fe, nullptr, out);
  }
  return out;
}

}  // namespace kls
