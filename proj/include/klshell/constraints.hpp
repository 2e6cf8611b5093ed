#pragma once

#include "klshell/element.hpp"

#include <optional>
#include <string>

namespace kls {

enum class ConstraintKind { g1, fold, symmetry, clamp, rot_dirichlet };
enum class LMInterp { N2Q0, N2Q1c };

ConstraintKind constraint_kind_from_string(const std::string& s);
std::string to_string(ConstraintKind k);

struct ConstraintMethod {
  bool lagrange = false;
  double epsilon = 0;  ///< penalty parameter
  LMInterp interp = LMInterp::N2Q0;
};

/// One edge-rotation condition. Two-sided kinds (g1, fold) use `pairs`;
/// one-sided kinds use `edges`.
struct EdgeConstraint {
  ConstraintKind kind = ConstraintKind::g1;
  ConstraintMethod method;
  std::vector<InterfacePair> pairs;
  std::vector<EdgeRef> edges;
  Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitZ();  ///< symmetry / rot_dirichlet
  std::optional<double> alpha0;                             ///< overrides the reference angle
};

/// Matched quadrature point of a constrained edge.
struct ConstraintPoint {
  int elemA = -1, elemB = -1;  ///< elemB < 0: one-sided
  BasisEval basisA, basisB;
  int tdir = 0;       ///< parametric direction of the edge on side A
  double w = 0;       ///< Gauss weight in the edge parameter
  double dS = 0;      ///< Gauss weight times reference length (side A)
  double c0 = 1, s0 = 0;
  Eigen::Vector3d nt_fixed = Eigen::Vector3d::Zero();  ///< fixed n~ for one-sided kinds
  int q[2] = {-1, -1};  ///< multiplier indices (relative to the LM block)
  double phi[2] = {0, 0};
};

struct CompiledConstraint {
  EdgeConstraint def;
  std::vector<ConstraintPoint> points;
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(const MultiPatchMesh& mesh, const std::vector<EdgeConstraint>& defs);

  int n_multipliers() const { return n_q_; }
  const std::vector<CompiledConstraint>& constraints() const { return cc_; }

  /// Adds the constraint gradient to r (size 3N + n_q) and tangent triplets.
  /// q: multiplier values. Returns the largest |alpha - alpha0| seen at LM points.
  double assemble(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q,
                  Eigen::VectorXd& r, std::vector<Eigen::Triplet<double>>* K) const;

  /// Total constraint potential (for checks).
  double potential(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q) const;

  struct PointReport {
    int constraint = 0;
    Eigen::Vector3d position;
    double cos_a = 1, sin_a = 0, cos_a0 = 1, sin_a0 = 0;
    double moment = 0;  ///< per reference length
    double dS_ref = 0, ds_cur = 0;
  };
  std::vector<PointReport> report(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x,
                                  const Eigen::VectorXd& q) const;

 private:
  std::vector<CompiledConstraint> cc_;
  int n_q_ = 0;
};

}  // namespace kls
