#include "klshell/constraints.hpp"

#include <cmath>

namespace kls {

namespace {

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Unit normal of one side with its first and second derivatives.
struct SideFrame {
  Vec3 a[2], aup[2], n;
  Mat2 acon;
  Eigen::MatrixXd Jn;  ///< 3 x 3m
  const BasisEval* basis = nullptr;

  SideFrame(const BasisEval& b, const NodalPositions& x) : basis(&b) {
    a[0] = x.transpose() * b.dN.col(0);
    a[1] = x.transpose() * b.dN.col(1);
    const Vec3 c = a[0].cross(a[1]);
    n = c / c.norm();
    Mat2 acov;
    acov << a[0].dot(a[0]), a[0].dot(a[1]), a[1].dot(a[0]), a[1].dot(a[1]);
    acon = acov.inverse();
    aup[0] = acon(0, 0) * a[0] + acon(0, 1) * a[1];
    aup[1] = acon(1, 0) * a[0] + acon(1, 1) * a[1];
    const int m = static_cast<int>(b.N.size());
    Jn.resize(3, 3 * m);
    for (int B = 0; B < m; ++B)
      Jn.block<3, 3>(0, 3 * B) = -(b.dN(B, 0) * aup[0] + b.dN(B, 1) * aup[1]) * n.transpose();
  }

  /// Hessian of g . n with respect to the side's nodal positions.
  Eigen::MatrixXd hessian(const Vec3& g) const {
    const int m = static_cast<int>(basis->N.size());
    Eigen::Matrix3d H[2][2];
    for (int mu = 0; mu < 2; ++mu)
      for (int nu = 0; nu < 2; ++nu)
        H[mu][nu] = g.dot(aup[mu]) * aup[nu] * n.transpose() + g.dot(aup[nu]) * n * aup[mu].transpose() -
                    g.dot(n) * acon(mu, nu) * n * n.transpose();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * m, 3 * m);
    for (int B = 0; B < m; ++B)
      for (int C = 0; C < m; ++C) {
        Eigen::Matrix3d blk = Eigen::Matrix3d::Zero();
        for (int mu = 0; mu < 2; ++mu)
          for (int nu = 0; nu < 2; ++nu) blk += basis->dN(B, mu) * basis->dN(C, nu) * H[mu][nu];
        K.block<3, 3>(3 * B, 3 * C) = blk;
      }
    return K;
  }
};

/// Unit edge tangent tau = a_t / |a_t| with derivatives.
struct EdgeTangent {
  Vec3 tau;
  double l = 0;
  Eigen::MatrixXd J;
  const BasisEval* basis;
  int t;

  EdgeTangent(const BasisEval& b, const NodalPositions& x, int tdir) : basis(&b), t(tdir) {
    const Vec3 at = x.transpose() * b.dN.col(tdir);
    l = at.norm();
    tau = at / l;
    const int m = static_cast<int>(b.N.size());
    const Eigen::Matrix3d P = (Eigen::Matrix3d::Identity() - tau * tau.transpose()) / l;
    J.resize(3, 3 * m);
    for (int B = 0; B < m; ++B) J.block<3, 3>(0, 3 * B) = b.dN(B, tdir) * P;
  }

  Eigen::MatrixXd hessian(const Vec3& th) const {
    const int m = static_cast<int>(basis->N.size());
    const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d H = -(th.dot(tau) * (I - 3.0 * tau * tau.transpose()) + th * tau.transpose() +
                                tau * th.transpose()) / (l * l);
    Eigen::MatrixXd K(3 * m, 3 * m);
    for (int B = 0; B < m; ++B)
      for (int C = 0; C < m; ++C) K.block<3, 3>(3 * B, 3 * C) = basis->dN(B, t) * basis->dN(C, t) * H;
    return K;
  }
};

struct PointEval {
  double P = 0;
  double cos_a = 1, sin_a = 0;
  Eigen::VectorXd grad;  ///< dP/dx over [A nodes, B nodes]
  Eigen::MatrixXd hess;
};

PointEval eval_point(const ConstraintPoint& cp, const NodalPositions& xA, const NodalPositions* xB, double C,
                     double S, bool with_hess) {
  const SideFrame fa(cp.basisA, xA);
  const EdgeTangent et(cp.basisA, xA, cp.tdir);
  const int mA = static_cast<int>(xA.rows()), mB = xB ? static_cast<int>(xB->rows()) : 0;
  std::optional<SideFrame> fb;
  Vec3 nt = cp.nt_fixed;
  if (xB) {
    fb.emplace(cp.basisB, *xB);
    nt = fb->n;
  }
  const Vec3& n = fa.n;
  const Vec3& tau = et.tau;
  PointEval pe;
  pe.cos_a = n.dot(nt);
  pe.sin_a = n.cross(nt).dot(tau);
  pe.P = C * pe.cos_a + S * pe.sin_a;
  const Vec3 Pn = C * nt + S * nt.cross(tau);
  const Vec3 Pnt = C * n + S * tau.cross(n);
  const Vec3 Pt = S * n.cross(nt);
  pe.grad = Eigen::VectorXd::Zero(3 * (mA + mB));
  pe.grad.head(3 * mA) = fa.Jn.transpose() * Pn + et.J.transpose() * Pt;
  if (xB) pe.grad.tail(3 * mB) = fb->Jn.transpose() * Pnt;
  if (!with_hess) return pe;

  pe.hess = Eigen::MatrixXd::Zero(3 * (mA + mB), 3 * (mA + mB));
  auto AA = pe.hess.topLeftCorner(3 * mA, 3 * mA);
  AA += fa.hessian(Pn) + et.hessian(Pt);
  const Eigen::MatrixXd ntau = fa.Jn.transpose() * (S * skew(nt)) * et.J;
  AA += ntau + ntau.transpose();
  if (xB) {
    pe.hess.bottomRightCorner(3 * mB, 3 * mB) += fb->hessian(Pnt);
    const Eigen::Matrix3d Pnn = C * Eigen::Matrix3d::Identity() - S * skew(tau);
    const Eigen::MatrixXd AB = fa.Jn.transpose() * Pnn * fb->Jn + et.J.transpose() * (-S * skew(n)).transpose() * fb->Jn;
    pe.hess.topRightCorner(3 * mA, 3 * mB) += AB;
    pe.hess.bottomLeftCorner(3 * mB, 3 * mA) += AB.transpose();
  }
  return pe;
}

std::vector<int> dof_list(const std::vector<int>& nA, const std::vector<int>* nB) {
  std::vector<int> d;
  for (int k : nA)
    for (int i = 0; i < 3; ++i) d.push_back(3 * k + i);
  if (nB)
    for (int k : *nB)
      for (int i = 0; i < 3; ++i) d.push_back(3 * k + i);
  return d;
}

double fixed_coord(const Patch& p, Side s) {
  switch (s) {
    case Side::u0: return p.ku.front();
    case Side::u1: return p.ku.back();
    case Side::v0: return p.kv.front();
    default: return p.kv.back();
  }
}

bool along_v(Side s) { return s == Side::u0 || s == Side::u1; }

Vec3 ref_normal(const BasisEval& b, const NodalPositions& X) {
  const Vec3 a1 = X.transpose() * b.dN.col(0), a2 = X.transpose() * b.dN.col(1);
  return a1.cross(a2).normalized();
}

bool two_sided(ConstraintKind k) { return k == ConstraintKind::g1 || k == ConstraintKind::fold; }

}  // namespace

ConstraintKind constraint_kind_from_string(const std::string& s) {
  if (s == "g1") return ConstraintKind::g1;
  if (s == "fold") return ConstraintKind::fold;
  if (s == "symmetry") return ConstraintKind::symmetry;
  if (s == "clamp") return ConstraintKind::clamp;
  if (s == "rot_dirichlet") return ConstraintKind::rot_dirichlet;
  throw std::invalid_argument("unknown constraint kind '" + s + "'");
}

std::string to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::g1: return "g1";
    case ConstraintKind::fold: return "fold";
    case ConstraintKind::symmetry: return "symmetry";
    case ConstraintKind::clamp: return "clamp";
    default: return "rot_dirichlet";
  }
}

ConstraintSet::ConstraintSet(const MultiPatchMesh& mesh, const std::vector<EdgeConstraint>& defs) {
  Eigen::MatrixX3d X(mesh.n_nodes(), 3);
  for (int i = 0; i < mesh.n_nodes(); ++i) X.row(i) = mesh.reference_positions()[i].transpose();
  for (const EdgeConstraint& d : defs) {
    if (!d.method.lagrange && !(d.method.epsilon > 0)) throw std::invalid_argument("penalty parameter must be positive");
    CompiledConstraint cc;
    cc.def = d;
    std::vector<InterfacePair> sides;
    if (two_sided(d.kind)) {
      sides = d.pairs.empty() ? mesh.interfaces : d.pairs;
      if (sides.empty()) throw std::invalid_argument(to_string(d.kind) + " constraint without interfaces");
    } else {
      for (const EdgeRef& e : d.edges) sides.push_back({e, {-1, Side::u0}, false});
      if (sides.empty()) throw std::invalid_argument(to_string(d.kind) + " constraint without edges");
    }
    for (const InterfacePair& ip : sides) {
      const Patch& pa = mesh.patches.at(ip.a.patch);
      const int tdir = along_v(ip.a.side) ? 1 : 0;
      const KnotVector& ka = tdir == 1 ? pa.kv : pa.ku;
      const auto pts = edge_quadrature(mesh, ip.a);
      const auto elems = mesh.side_elements(ip.a);
      const int q_base = n_q_;
      if (d.method.lagrange)
        n_q_ += d.method.interp == LMInterp::N2Q0 ? static_cast<int>(elems.size()) : static_cast<int>(elems.size()) + 1;
      for (const EdgePoint& ep : pts) {
        ConstraintPoint cp;
        cp.elemA = ep.element;
        cp.basisA = ep.basis;
        cp.tdir = tdir;
        const NodalPositions XA = gather(mesh.elements()[ep.element].nodes, X);
        const Vec3 At = XA.transpose() * ep.basis.dN.col(tdir);
        cp.w = ep.w;
        cp.dS = ep.w * At.norm();
        const Vec3 tau0 = At.normalized();
        const Vec3 NA = ref_normal(ep.basis, XA);
        Vec3 NB = NA;
        if (two_sided(d.kind)) {
          const Patch& pb = mesh.patches.at(ip.b.patch);
          const KnotVector& kb = along_v(ip.b.side) ? pb.kv : pb.ku;
          double s = (ep.t - ka.front()) / (ka.back() - ka.front());
          if (ip.reversed) s = 1.0 - s;
          const double tb = kb.front() + s * (kb.back() - kb.front());
          const double fb = fixed_coord(pb, ip.b.side);
          const double u = along_v(ip.b.side) ? fb : tb, v = along_v(ip.b.side) ? tb : fb;
          cp.elemB = mesh.element_at(ip.b.patch, u, v);
          cp.basisB = mesh.basis(ip.b.patch).eval(mesh.elements()[cp.elemB].local, u, v);
          NB = ref_normal(cp.basisB, gather(mesh.elements()[cp.elemB].nodes, X));
        }
        switch (d.kind) {
          case ConstraintKind::g1:
            cp.c0 = 1;
            cp.s0 = 0;
            break;
          case ConstraintKind::fold:
            cp.c0 = NA.dot(NB);
            cp.s0 = NA.cross(NB).dot(tau0);
            break;
          case ConstraintKind::symmetry:
            cp.nt_fixed = d.plane_normal.normalized();
            cp.c0 = NA.dot(cp.nt_fixed);
            cp.s0 = NA.cross(cp.nt_fixed).dot(tau0);
            break;
          case ConstraintKind::clamp:
            cp.nt_fixed = NA;
            cp.c0 = 1;
            cp.s0 = 0;
            break;
          case ConstraintKind::rot_dirichlet:
            cp.nt_fixed = d.plane_normal.normalized();
            cp.c0 = 1;
            cp.s0 = 0;
            break;
        }
        if (d.alpha0) {
          cp.c0 = std::cos(*d.alpha0);
          cp.s0 = std::sin(*d.alpha0);
        }
        if (d.method.lagrange) {
          int k = 0;
          while (elems[k] != ep.element) ++k;
          if (d.method.interp == LMInterp::N2Q0) {
            cp.q[0] = q_base + k;
            cp.phi[0] = 1.0;
          } else {
            const PatchElement& pe = mesh.basis(ip.a.patch).elements()[mesh.elements()[ep.element].local];
            const double t0 = tdir == 1 ? pe.v0 : pe.u0, t1 = tdir == 1 ? pe.v1 : pe.u1;
            const double s = (ep.t - t0) / (t1 - t0);
            cp.q[0] = q_base + k;
            cp.q[1] = q_base + k + 1;
            cp.phi[0] = 1.0 - s;
            cp.phi[1] = s;
          }
        }
        cc.points.push_back(std::move(cp));
      }
    }
    cc_.push_back(std::move(cc));
  }
}

double ConstraintSet::assemble(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q,
                               Eigen::VectorXd& r, std::vector<Eigen::Triplet<double>>* K) const {
  const int off = 3 * mesh.n_nodes();
  double drift = 0;
  for (const CompiledConstraint& cc : cc_) {
    const bool lm = cc.def.method.lagrange;
    for (const ConstraintPoint& cp : cc.points) {
      const auto& nA = mesh.elements()[cp.elemA].nodes;
      const std::vector<int>* nB = cp.elemB >= 0 ? &mesh.elements()[cp.elemB].nodes : nullptr;
      const NodalPositions xA = gather(nA, x);
      NodalPositions xB;
      if (nB) xB = gather(*nB, x);
      const double C = lm ? cp.c0 + cp.s0 : cp.c0, S = lm ? cp.s0 - cp.c0 : cp.s0;
      const PointEval pe = eval_point(cp, xA, nB ? &xB : nullptr, C, S, K != nullptr);
      double kappa = cc.def.method.epsilon;
      if (lm) {
        kappa = 0;
        for (int j = 0; j < 2; ++j)
          if (cp.q[j] >= 0) kappa += cp.phi[j] * q[cp.q[j]];
        const double dc = pe.cos_a * cp.c0 + pe.sin_a * cp.s0, ds = pe.sin_a * cp.c0 - pe.cos_a * cp.s0;
        drift = std::max(drift, std::abs(std::atan2(ds, dc)));
      }
      const std::vector<int> dofs = dof_list(nA, nB);
      const int nd = static_cast<int>(dofs.size());
      for (int i = 0; i < nd; ++i) r[dofs[i]] -= kappa * cp.dS * pe.grad[i];
      if (lm)
        for (int j = 0; j < 2; ++j)
          if (cp.q[j] >= 0) r[off + cp.q[j]] += cp.phi[j] * cp.dS * (1.0 - pe.P);
      if (!K) continue;
      for (int i = 0; i < nd; ++i)
        for (int k = 0; k < nd; ++k) {
          const double v = -kappa * cp.dS * pe.hess(i, k);
          if (v != 0.0) K->emplace_back(dofs[i], dofs[k], v);
        }
      if (lm)
        for (int j = 0; j < 2; ++j) {
          if (cp.q[j] < 0) continue;
          for (int i = 0; i < nd; ++i) {
            const double v = -cp.phi[j] * cp.dS * pe.grad[i];
            if (v == 0.0) continue;
            K->emplace_back(dofs[i], off + cp.q[j], v);
            K->emplace_back(off + cp.q[j], dofs[i], v);
          }
        }
    }
  }
  return drift;
}

double ConstraintSet::potential(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q) const {
  double Pi = 0;
  for (const CompiledConstraint& cc : cc_) {
    const bool lm = cc.def.method.lagrange;
    for (const ConstraintPoint& cp : cc.points) {
      const NodalPositions xA = gather(mesh.elements()[cp.elemA].nodes, x);
      NodalPositions xB;
      if (cp.elemB >= 0) xB = gather(mesh.elements()[cp.elemB].nodes, x);
      const double C = lm ? cp.c0 + cp.s0 : cp.c0, S = lm ? cp.s0 - cp.c0 : cp.s0;
      const PointEval pe = eval_point(cp, xA, cp.elemB >= 0 ? &xB : nullptr, C, S, false);
      double kappa = cc.def.method.epsilon;
      if (lm) {
        kappa = 0;
        for (int j = 0; j < 2; ++j)
          if (cp.q[j] >= 0) kappa += cp.phi[j] * q[cp.q[j]];
      }
      Pi += kappa * cp.dS * (1.0 - pe.P);
    }
  }
  return Pi;
}

std::vector<ConstraintSet::PointReport> ConstraintSet::report(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x,
                                                              const Eigen::VectorXd& q) const {
  std::vector<PointReport> out;
  for (size_t c = 0; c < cc_.size(); ++c) {
    const CompiledConstraint& cc = cc_[c];
    for (const ConstraintPoint& cp : cc.points) {
      const NodalPositions xA = gather(mesh.elements()[cp.elemA].nodes, x);
      NodalPositions xB;
      if (cp.elemB >= 0) xB = gather(mesh.elements()[cp.elemB].nodes, x);
      const PointEval pe = eval_point(cp, xA, cp.elemB >= 0 ? &xB : nullptr, 1.0, 0.0, false);
      PointReport pr;
      pr.constraint = static_cast<int>(c);
      pr.position = xA.transpose() * cp.basisA.N;
      pr.cos_a = pe.cos_a;
      pr.sin_a = pe.sin_a;
      pr.cos_a0 = cp.c0;
      pr.sin_a0 = cp.s0;
      if (cc.def.method.lagrange) {
        double qq = 0;
        for (int j = 0; j < 2; ++j)
          if (cp.q[j] >= 0) qq += cp.phi[j] * q[cp.q[j]];
        pr.moment = -qq;
      } else {
        pr.moment = cc.def.method.epsilon * (pe.sin_a * cp.c0 - pe.cos_a * cp.s0);
      }
      pr.dS_ref = cp.dS;
      pr.ds_cur = cp.w * (xA.transpose() * cp.basisA.dN.col(cp.tdir)).norm();
      out.push_back(pr);
    }
  }
  return out;
}

}  // namespace kls
