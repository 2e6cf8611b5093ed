#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "klshell/constraints.hpp"
#include "test_util.hpp"

#include <Eigen/Sparse>

#include <cmath>

using namespace kls;
using kls::test::rel_err;

namespace {

const double kPi = std::acos(-1.0);

/// Two plates meeting along x = 1 at dihedral angle pi - beta.
MultiPatchMesh fold_mesh(double beta, bool reversed = false, int n = 2) {
  MultiPatchMesh m;
  const Eigen::Vector3d d(std::cos(beta), 0, std::sin(beta));
  m.patches.push_back(make_plate_patch(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), 2, n, n));
  if (reversed)
    m.patches.push_back(make_plate_patch(Eigen::Vector3d(1, 1, 0) + d, -d, Eigen::Vector3d(0, -1, 0), 2, n, n));
  else
    m.patches.push_back(make_plate_patch(Eigen::Vector3d(1, 0, 0), d, Eigen::Vector3d(0, 1, 0), 2, n, n));
  m.finalize();
  return m;
}

Eigen::MatrixX3d positions(const MultiPatchMesh& m) {
  Eigen::MatrixX3d X(m.n_nodes(), 3);
  for (int i = 0; i < m.n_nodes(); ++i) X.row(i) = m.reference_positions()[i].transpose();
  return X;
}

struct Problem {
  const MultiPatchMesh* mesh;
  const ConstraintSet* cs;
  int nx() const { return 3 * mesh->n_nodes(); }
  int nz() const { return nx() + cs->n_multipliers(); }
  Eigen::MatrixX3d x_of(const Eigen::VectorXd& z) const {
    Eigen::MatrixX3d x(mesh->n_nodes(), 3);
    for (int k = 0; k < mesh->n_nodes(); ++k) x.row(k) = z.segment<3>(3 * k).transpose();
    return x;
  }
  double Pi(const Eigen::VectorXd& z) const { return cs->potential(*mesh, x_of(z), z.tail(cs->n_multipliers())); }
  Eigen::VectorXd r(const Eigen::VectorXd& z, Eigen::SparseMatrix<double>* K = nullptr) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nz());
    std::vector<Eigen::Triplet<double>> t;
    cs->assemble(*mesh, x_of(z), z.tail(cs->n_multipliers()), out, K ? &t : nullptr);
    if (K) {
      K->resize(nz(), nz());
      K->setFromTriplets(t.begin(), t.end());
    }
    return out;
  }
};

Eigen::VectorXd state(const MultiPatchMesh& m, int nq, double amp, double qamp) {
  const Eigen::MatrixX3d X = positions(m);
  Eigen::VectorXd z(3 * m.n_nodes() + nq);
  for (int k = 0; k < m.n_nodes(); ++k)
    for (int i = 0; i < 3; ++i) z[3 * k + i] = X(k, i) + amp * kls::test::uniform(-1, 1);
  for (int k = 0; k < nq; ++k) z[3 * m.n_nodes() + k] = qamp * kls::test::uniform(-1, 1);
  return z;
}

void check_derivatives(const MultiPatchMesh& mesh, const ConstraintSet& cs, double amp) {
  const Problem pb{&mesh, &cs};
  const Eigen::VectorXd z = state(mesh, cs.n_multipliers(), amp, 2.0);
  Eigen::SparseMatrix<double> K;
  const Eigen::VectorXd r = pb.r(z, &K);
  const double h = 1e-6;
  Eigen::VectorXd g(pb.nz());
  Eigen::MatrixXd Kfd(pb.nz(), pb.nz());
  for (int i = 0; i < pb.nz(); ++i) {
    Eigen::VectorXd zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    g[i] = (pb.Pi(zp) - pb.Pi(zm)) / (2 * h);
    Kfd.col(i) = (pb.r(zp) - pb.r(zm)) / (2 * h);
  }
  CHECK(rel_err(r, g) < 1e-6);
  const Eigen::MatrixXd Kd(K);
  CHECK(rel_err(Kd, Kfd) < 1e-5);
  CHECK(rel_err(Kd, Kd.transpose()) < 1e-12);
}

EdgeConstraint fold_def(bool lm, LMInterp interp = LMInterp::N2Q0) {
  EdgeConstraint d;
  d.kind = ConstraintKind::fold;
  d.method.lagrange = lm;
  d.method.epsilon = lm ? 0.0 : 3.0;
  d.method.interp = interp;
  return d;
}

}  // namespace

TEST_CASE("kind names round trip") {
  for (auto k : {ConstraintKind::g1, ConstraintKind::fold, ConstraintKind::symmetry, ConstraintKind::clamp,
                 ConstraintKind::rot_dirichlet})
    CHECK(constraint_kind_from_string(to_string(k)) == k);
  CHECK_THROWS(constraint_kind_from_string("weld"));
}

TEST_CASE("interface detection and point matching") {
  for (bool rev : {false, true}) {
    const MultiPatchMesh mesh = fold_mesh(0.7, rev);
    REQUIRE(mesh.interfaces.size() == 1);
    CHECK(mesh.interfaces[0].reversed == rev);
    const ConstraintSet cs(mesh, {fold_def(false)});
    const Eigen::MatrixX3d X = positions(mesh);
    const auto& pts = cs.constraints()[0].points;
    CHECK(pts.size() == 6);
    for (const auto& cp : pts) {
      const Eigen::Vector3d pa = gather(mesh.elements()[cp.elemA].nodes, X).transpose() * cp.basisA.N;
      const Eigen::Vector3d pbp = gather(mesh.elements()[cp.elemB].nodes, X).transpose() * cp.basisB.N;
      CHECK((pa - pbp).norm() < 1e-13);
      CHECK(std::hypot(cp.c0, cp.s0) == doctest::Approx(1.0));
      CHECK(std::abs(std::atan2(cp.s0, cp.c0)) == doctest::Approx(0.7));
    }
  }
}

TEST_CASE("multiplier counts") {
  const MultiPatchMesh mesh = fold_mesh(0.5, false, 3);
  CHECK(ConstraintSet(mesh, {fold_def(true, LMInterp::N2Q0)}).n_multipliers() == 3);
  CHECK(ConstraintSet(mesh, {fold_def(true, LMInterp::N2Q1c)}).n_multipliers() == 4);
  CHECK(ConstraintSet(mesh, {fold_def(false)}).n_multipliers() == 0);
  EdgeConstraint bad = fold_def(false);
  bad.method.epsilon = 0;
  CHECK_THROWS(ConstraintSet(mesh, {bad}));
}

TEST_CASE("penalty fold: gradient and tangent match finite differences") {
  for (bool rev : {false, true}) {
    const MultiPatchMesh mesh = fold_mesh(kPi / 3, rev);
    check_derivatives(mesh, ConstraintSet(mesh, {fold_def(false)}), 0.05);
  }
}

TEST_CASE("lagrange fold: gradient and tangent match finite differences") {
  const MultiPatchMesh mesh = fold_mesh(kPi / 3);
  check_derivatives(mesh, ConstraintSet(mesh, {fold_def(true, LMInterp::N2Q0)}), 0.05);
  check_derivatives(mesh, ConstraintSet(mesh, {fold_def(true, LMInterp::N2Q1c)}), 0.05);
}

TEST_CASE("one-sided kinds: gradient and tangent match finite differences") {
  const MultiPatchMesh mesh = fold_mesh(0.4);
  for (auto kind : {ConstraintKind::symmetry, ConstraintKind::clamp, ConstraintKind::rot_dirichlet})
    for (bool lm : {false, true}) {
      EdgeConstraint d;
      d.kind = kind;
      d.method.lagrange = lm;
      d.method.epsilon = 2.0;
      d.plane_normal = Eigen::Vector3d(0.2, 1.0, 0.1);
      d.edges = {{0, Side::v0}, {1, Side::u1}};
      check_derivatives(mesh, ConstraintSet(mesh, {d}), 0.05);
    }
}

TEST_CASE("rest state is force free and reports the reference angle") {
  const MultiPatchMesh mesh = fold_mesh(kPi / 2);
  const Eigen::MatrixX3d X = positions(mesh);
  for (bool lm : {false, true}) {
    const ConstraintSet cs(mesh, {fold_def(lm, LMInterp::N2Q1c)});
    const Eigen::VectorXd q = Eigen::VectorXd::Zero(cs.n_multipliers());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(3 * mesh.n_nodes() + cs.n_multipliers());
    const double drift = cs.assemble(mesh, X, q, r, nullptr);
    CHECK(r.norm() < 1e-12);
    CHECK(drift < 1e-12);
    if (lm) {
      // a nonzero multiplier loads the edge but the constraint stays satisfied
      Eigen::VectorXd r2 = Eigen::VectorXd::Zero(r.size());
      cs.assemble(mesh, X, Eigen::VectorXd::Constant(cs.n_multipliers(), 1.7), r2, nullptr);
      CHECK(r2.tail(cs.n_multipliers()).norm() < 1e-12);
      CHECK(r2.head(3 * mesh.n_nodes()).norm() > 1e-3);
    }
    for (const auto& p : cs.report(mesh, X, q)) {
      CHECK(std::abs(p.cos_a) < 1e-12);
      CHECK(std::abs(p.sin_a) == doctest::Approx(1.0));
      CHECK(p.cos_a * p.cos_a + p.sin_a * p.sin_a == doctest::Approx(1.0));
      CHECK(p.ds_cur == doctest::Approx(p.dS_ref));
    }
  }
}

TEST_CASE("rigid motion leaves the constraint unloaded") {
  const MultiPatchMesh mesh = fold_mesh(0.9, true);
  const ConstraintSet cs(mesh, {fold_def(false)});
  const Eigen::Matrix3d R = Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Eigen::MatrixX3d x = (positions(mesh) * R.transpose()).rowwise() + Eigen::RowVector3d(0.3, -1, 2);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(3 * mesh.n_nodes());
  cs.assemble(mesh, x, Eigen::VectorXd(), r, nullptr);
  CHECK(r.norm() < 1e-12);
  CHECK(std::abs(cs.potential(mesh, x, Eigen::VectorXd())) < 1e-12);
}

TEST_CASE("opening the fold reports a moment of the penalty law") {
  const double beta = 0.6, dbeta = 0.05, eps = 3.0;
  const MultiPatchMesh ref = fold_mesh(beta);
  const MultiPatchMesh cur = fold_mesh(beta + dbeta);
  const ConstraintSet cs(ref, {fold_def(false)});
  const auto rep = cs.report(ref, positions(cur), Eigen::VectorXd());
  for (const auto& p : rep) {
    const double a = std::atan2(p.sin_a, p.cos_a), a0 = std::atan2(p.sin_a0, p.cos_a0);
    CHECK(std::abs(a - a0) == doctest::Approx(dbeta));
    CHECK(std::abs(p.moment) == doctest::Approx(eps * std::sin(dbeta)));
  }
}
