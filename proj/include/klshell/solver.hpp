#pragma once

#include "klshell/constraints.hpp"
#include "klshell/element.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace kls {

/// Prescribed displacement of a node set. proportional: scaled by the load factor.
struct DirichletBC {
  std::vector<int> nodes;
  std::array<bool, 3> fix{true, true, true};
  Eigen::Vector3d displacement = Eigen::Vector3d::Zero();
  bool proportional = false;
};

struct ShellModel {
  MultiPatchMesh mesh;
  std::vector<MaterialLaw> materials;  ///< one law, or one per patch
  std::vector<EdgeConstraint> constraint_defs;
  LoadCase loads;
  std::vector<DirichletBC> dirichlet;

  // filled by prepare()
  std::vector<ElementCache> cache;
  ConstraintSet constraints;

  /// Builds the quadrature cache and compiles the constraints.
  void prepare();
  const MaterialLaw& material(int patch) const;
  int n_dofs() const { return 3 * mesh.n_nodes() + constraints.n_multipliers(); }
};

struct GlobalSystem {
  Eigen::VectorXd r;  ///< f_int + f_c - lambda f_ext over 3N + n_q entries
  Eigen::SparseMatrix<double> K;
  Eigen::VectorXd f_ext;  ///< external force at unit load factor
  double lm_drift = 0;    ///< largest |alpha - alpha0| at multiplier points
};

/// x: current positions; q: multipliers. dead_loads: follower loads taken at the reference.
GlobalSystem assemble(const ShellModel& model, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q, double lambda,
                      bool with_tangent = true, bool dead_loads = false, int threads = 1);

double internal_energy(const ShellModel& model, const Eigen::MatrixX3d& x);

struct SolverConfig {
  int n_load_steps = 1;
  int max_newton_iter = 30;
  double tol_rel_residual = 1e-8;
  double tol_abs_residual = 1e-12;
  /// Also converged once a Newton correction is below this fraction of the model size.
  double tol_increment = 1e-13;
  int max_cuts = 4;
  /// Start each increment from a secant extrapolation of the last two converged states.
  bool extrapolate = false;
  bool linear = false;  ///< single solve at the reference with dead loads
  int threads = 1;
};

/// Free/fixed partition of the global unknowns.
class DofMap {
 public:
  DofMap(int n_nodes, int n_q, const std::vector<DirichletBC>& bcs);
  int size() const { return static_cast<int>(fixed_.size()); }
  int n_free() const { return static_cast<int>(free_.size()); }
  bool fixed(int d) const { return fixed_[d]; }
  const std::vector<int>& free_dofs() const { return free_; }
  /// Prescribed displacement of a fixed DOF at load factor lambda.
  double prescribed(int d, double lambda) const { return value_[d] * (proportional_[d] ? lambda : 1.0); }

 private:
  std::vector<char> fixed_, proportional_;
  std::vector<double> value_;
  std::vector<int> free_;
};

struct StepRecord {
  double lambda = 0;
  int iterations = 0;
  int cuts = 0;
  bool converged = false;
  std::vector<double> residuals;  ///< free residual norm per iteration
  Eigen::MatrixX3d x;
  Eigen::VectorXd q;
};

struct SolveResult {
  bool converged = false;
  std::string message;
  std::vector<StepRecord> steps;  ///< one per requested load step
  Eigen::MatrixX3d x;
  Eigen::VectorXd q;
  Eigen::VectorXd reactions;  ///< residual at fixed DOFs (3N), zero elsewhere
  double wall_seconds = 0;
};

SolveResult newton_solve(const ShellModel& model, const SolverConfig& cfg);

Eigen::MatrixX3d reference_positions(const MultiPatchMesh& mesh);

}  // namespace kls
