#pragma once

#include "klshell/constitutive.hpp"
#include "klshell/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <vector>

namespace kls {

/// Reference data of one surface quadrature point.
struct QuadPoint {
  BasisEval basis;
  ReferenceState ref;
  double dA = 0;  ///< Gauss weight times reference area Jacobian
};

/// Element with its nodes and precomputed reference quadrature.
struct ElementCache {
  int index = 0;
  int patch = 0;
  std::vector<int> nodes;
  double scale = 1;  ///< reference size used by degeneracy checks
  std::vector<QuadPoint> qp;
};

/// (p+1) x (q+1) Gauss points per element.
std::vector<ElementCache> build_element_cache(const MultiPatchMesh& mesh);

NodalPositions gather(const std::vector<int>& nodes, const Eigen::MatrixX3d& x);

struct ElementResult {
  Eigen::VectorXd f;  ///< 3n, DOF order 3*A + i
  Eigen::MatrixXd K;
};

/// Internal force and consistent tangent of one element.
ElementResult internal_element(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law,
                               bool with_tangent = true);

/// Strain energy of one element (direct 2D laws only).
double element_energy(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law);

/// Tangent split into its material and geometric parts, for inspection and tests.
struct TangentParts {
  Eigen::MatrixXd k_tt, k_tM, k_Mt, k_MM, k_tau, k_M1, k_M2;
};
TangentParts tangent_parts(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law);

// ---------------------------------------------------------------- loads

enum class PressureProfile { uniform, sinusoidal };

/// Pressure p along n. Sinusoidal: p(X) = p sin(pi (X - X0)/Lx) sin(pi (Y - Y0)/Ly) at reference points.
struct PressureLoad {
  double p = 0;
  bool follower = true;  ///< false: dead load on the reference normal and area
  PressureProfile profile = PressureProfile::uniform;
  double Lx = 1, Ly = 1;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::vector<int> patches;  ///< empty: all patches
};

/// Dead force per reference area.
struct SurfaceForce {
  Eigen::Vector3d f0 = Eigen::Vector3d::Zero();
  std::vector<int> patches;
};

/// Dead traction per reference length.
struct EdgeTraction {
  std::vector<EdgeRef> edges;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Bending moment m_tau on a boundary edge. live: per current length; dead: per reference length.
struct BoundaryMoment {
  std::vector<EdgeRef> edges;
  double m = 0;
  bool live = true;
};

/// Dead force at a parametric point of a patch.
struct PointLoad {
  int patch = 0;
  double u = 0, v = 0;
  Eigen::Vector3d F = Eigen::Vector3d::Zero();
};

struct LoadCase {
  std::vector<PressureLoad> pressures;
  std::vector<SurfaceForce> surface_forces;
  std::vector<EdgeTraction> tractions;
  std::vector<BoundaryMoment> moments;
  std::vector<PointLoad> points;
  bool empty() const {
    return pressures.empty() && surface_forces.empty() && tractions.empty() && moments.empty() && points.empty();
  }
};

/// Global external force at unit load factor and its derivative with respect
/// to the nodal positions as triplets (empty unless requested).
struct ExternalForce {
  Eigen::VectorXd f;
  std::vector<Eigen::Triplet<double>> K;
};

/// dead_only: follower contributions are evaluated at the reference configuration without tangent.
ExternalForce external_forces(const MultiPatchMesh& mesh, const std::vector<ElementCache>& cache, const LoadCase& load,
                              const Eigen::MatrixX3d& x, bool with_tangent, bool dead_only = false);

/// Edge quadrature point on a patch side.
struct EdgePoint {
  int element = 0;  ///< global element index
  BasisEval basis;
  double w = 0;      ///< Gauss weight in the edge parameter
  double t = 0;      ///< edge parameter value
};

/// p+1 Gauss points per element along a side, ordered by increasing edge parameter.
std::vector<EdgePoint> edge_quadrature(const MultiPatchMesh& mesh, const EdgeRef& e);

/// Boundary-moment force and tangent of a single edge point.
void boundary_moment_point(const EdgePoint& ep, Side side, const NodalPositions& x, const NodalPositions& X,
                           double m, bool live, Eigen::VectorXd& f, Eigen::MatrixXd* K);

}  // namespace kls
