#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "klshell/solver.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace kls;
using kls::test::rel_err;

namespace {

ShellModel cap_model(bool canham = true) {
  ShellModel m;
  m.mesh.patches.push_back(refine(make_sphere_patch(2.0, 20.0, 70.0, 0.0, 60.0, 2, 1, 1), 2, 2));
  m.mesh.finalize();
  if (canham)
    m.materials = {CanhamNH{3.0, 2.0, 0.05}};
  else
    m.materials = {Koiter{3.0, 2.0, 0.1}};
  m.loads.pressures.push_back(PressureLoad{0.7});
  m.loads.points.push_back(PointLoad{0, 0.5, 0.5, Eigen::Vector3d(0.1, 0.2, -0.3)});
  m.prepare();
  return m;
}

/// Cubic 1 x 10 cantilever along y, clamped at y = 0, tip traction in z.
ShellModel cantilever(double F, bool with_clamp = true) {
  ShellModel m;
  m.mesh.patches.push_back(
      make_plate_patch(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 10, 0), 3, 1, 10));
  m.mesh.finalize();
  const double E = 1.2e6, T = 0.1;
  const auto [L, mu] = lame_2d_from_3d(E, 0.0, T);
  m.materials = {Koiter{L, mu, T}};
  DirichletBC bc;
  bc.nodes = m.mesh.side_nodes({0, Side::v0});
  m.dirichlet.push_back(bc);
  if (with_clamp) {
    EdgeConstraint c;
    c.kind = ConstraintKind::clamp;
    c.method.epsilon = 1000 * E;
    c.edges = {{0, Side::v0}};
    m.constraint_defs.push_back(c);
  }
  m.loads.tractions.push_back(EdgeTraction{{{0, Side::v1}}, Eigen::Vector3d(0, 0, F)});
  m.prepare();
  return m;
}

}  // namespace

TEST_CASE("reference state without loads has zero residual") {
  ShellModel m = cap_model(false);
  m.loads = LoadCase{};
  const GlobalSystem sys = assemble(m, reference_positions(m.mesh), Eigen::VectorXd(), 1.0);
  CHECK(sys.r.norm() < 1e-12);
}

TEST_CASE("global tangent matches finite differences of the residual") {
  for (int threads : {1, 3}) {
    const ShellModel m = cap_model();
    Eigen::MatrixX3d x = reference_positions(m.mesh);
    for (int i = 0; i < x.rows(); ++i) x.row(i) += 0.05 * Eigen::RowVector3d::Random();
    const double lam = 0.8;
    const GlobalSystem sys = assemble(m, x, Eigen::VectorXd(), lam, true, false, threads);
    const Eigen::MatrixXd K(sys.K);
    Eigen::MatrixXd Kfd(K.rows(), K.cols());
    const double h = 1e-6;
    for (int d = 0; d < K.cols(); ++d) {
      Eigen::MatrixX3d xp = x, xm = x;
      xp(d / 3, d % 3) += h;
      xm(d / 3, d % 3) -= h;
      Kfd.col(d) = (assemble(m, xp, Eigen::VectorXd(), lam, false).r - assemble(m, xm, Eigen::VectorXd(), lam, false).r) /
                   (2 * h);
    }
    CHECK(rel_err(K, Kfd) < 1e-5);
  }
}

TEST_CASE("assembly is reproducible") {
  const ShellModel m = cap_model();
  Eigen::MatrixX3d x = reference_positions(m.mesh);
  x.col(2) *= 1.05;
  for (int threads : {1, 4}) {
    const GlobalSystem a = assemble(m, x, Eigen::VectorXd(), 1.0, true, false, threads);
    const GlobalSystem b = assemble(m, x, Eigen::VectorXd(), 1.0, true, false, threads);
    CHECK((a.r - b.r).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::MatrixXd(a.K - b.K).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("element failures carry the element index") {
  const ShellModel m = cap_model();
  Eigen::MatrixX3d x = reference_positions(m.mesh);
  x.setZero();
  try {
    assemble(m, x, Eigen::VectorXd(), 1.0);
    FAIL("expected a geometry error");
  } catch (const SingularGeometry& e) {
    CHECK(std::string(e.what()).find("element") != std::string::npos);
  }
}

TEST_CASE("dof map") {
  DirichletBC a;
  a.nodes = {0, 1};
  DirichletBC b;
  b.nodes = {1};
  b.fix = {true, false, false};
  const DofMap map(3, 2, {a, b});
  CHECK(map.size() == 11);
  CHECK(map.n_free() == 5);
  b.displacement.x() = 0.1;
  CHECK_THROWS_AS(DofMap(3, 0, {a, b}), std::invalid_argument);
}

TEST_CASE("small load converges in one iteration") {
  const ShellModel m = cantilever(1e-6);
  const SolveResult r = newton_solve(m, SolverConfig{});
  REQUIRE(r.converged);
  CHECK(r.steps[0].iterations <= 2);
  SolverConfig lin;
  lin.linear = true;
  const SolveResult l = newton_solve(m, lin);
  CHECK(rel_err(r.x - reference_positions(m.mesh), l.x - reference_positions(m.mesh)) < 1e-5);
}

TEST_CASE("linear mode is independent of the step schedule") {
  const ShellModel m = cantilever(1.0);
  SolverConfig c1, c5;
  c1.linear = c5.linear = true;
  c5.n_load_steps = 5;
  const SolveResult a = newton_solve(m, c1), b = newton_solve(m, c5);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(b.steps.size() == 5);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() < 1e-10);
  // Euler-Bernoulli tip deflection F L^3 / (3 E I) with F0 = EI/L^2
  const double w = a.x.col(2).maxCoeff();
  CHECK(w == doctest::Approx(10.0 / 3.0).epsilon(0.01));
  // reactions balance the applied load
  double Rz = 0;
  for (int n = 0; n < m.mesh.n_nodes(); ++n) Rz += a.reactions[3 * n + 2];
  CHECK(Rz == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("nonlinear cantilever converges quadratically") {
  const ShellModel m = cantilever(4.0);
  SolverConfig cfg;
  cfg.n_load_steps = 8;
  const SolveResult r = newton_solve(m, cfg);
  REQUIRE(r.converged);
  for (const StepRecord& s : r.steps) {
    CHECK(s.iterations <= 30);
    const auto& h = s.residuals;
    REQUIRE(h.size() >= 4);
    // normalized residuals contract quadratically in the tail
    double best = 1e300;
    for (size_t k = h.size() - 3; k + 1 < h.size(); ++k)
      best = std::min(best, (h[k + 1] / h[0]) / std::pow(h[k] / h[0], 2));
    CHECK(best < 10.0);
  }
  // admissible variations do no work at convergence
  const GlobalSystem sys = assemble(m, r.x, r.q, 1.0, false);
  const DofMap map(m.mesh.n_nodes(), 0, m.dirichlet);
  for (int t = 0; t < 5; ++t) {
    double w = 0;
    for (int d : map.free_dofs()) w += kls::test::uniform(-1, 1) * sys.r[d];
    CHECK(std::abs(w) < 1e-6);
  }
  // inextensible elastica at P L^2 / EI = 4: tip deflection 0.6700 L
  CHECK(r.x.col(2).maxCoeff() == doctest::Approx(6.70).epsilon(0.01));
}

TEST_CASE("fully prescribed model returns the prescription") {
  ShellModel m = cantilever(1.0, false);
  DirichletBC all;
  for (int n = 0; n < m.mesh.n_nodes(); ++n) all.nodes.push_back(n);
  all.displacement = Eigen::Vector3d(0, 0, 0.01);
  all.proportional = true;
  m.dirichlet = {all};
  m.prepare();
  const SolveResult r = newton_solve(m, SolverConfig{});
  REQUIRE(r.converged);
  CHECK(((r.x - reference_positions(m.mesh)).col(2).array() - 0.01).abs().maxCoeff() < 1e-14);
}

TEST_CASE("prescribed tip displacement yields the reaction") {
  ShellModel m = cantilever(0.0);
  m.loads = LoadCase{};
  DirichletBC tip;
  tip.nodes = m.mesh.side_nodes({0, Side::v1});
  tip.fix = {false, false, true};
  tip.displacement = Eigen::Vector3d(0, 0, 0.01);
  tip.proportional = true;
  m.dirichlet.push_back(tip);
  m.prepare();
  SolverConfig cfg;
  cfg.linear = true;
  const SolveResult r = newton_solve(m, cfg);
  REQUIRE(r.converged);
  double Ftip = 0;
  for (int n : tip.nodes) Ftip += r.reactions[3 * n + 2];
  // linear beam: F = 3 E I w / L^3 with EI = 100
  CHECK(Ftip == doctest::Approx(3.0 * 0.01 * 100.0 / 1000.0).epsilon(0.01));
}

TEST_CASE("secant predictor reaches the same equilibrium") {
  const ShellModel m = cantilever(4.0);
  SolverConfig cfg;
  cfg.n_load_steps = 8;
  const SolveResult plain = newton_solve(m, cfg);
  cfg.extrapolate = true;
  const SolveResult ext = newton_solve(m, cfg);
  REQUIRE(plain.converged);
  REQUIRE(ext.converged);
  CHECK((plain.x - ext.x).cwiseAbs().maxCoeff() < 1e-8);
  // the first step has no history; later steps start from the extrapolated state
  CHECK(ext.steps[0].residuals == plain.steps[0].residuals);
  CHECK(ext.steps[1].residuals.front() != doctest::Approx(plain.steps[1].residuals.front()));
  for (const StepRecord& s : ext.steps) CHECK(s.iterations <= 30);
}
