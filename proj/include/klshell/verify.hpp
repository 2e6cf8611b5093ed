#pragma once

#include "klshell/benchmarks.hpp"

#include <random>
#include <string>
#include <vector>

namespace kls {

/// Material of moderate stiffness for each supported law name.
MaterialLaw verification_law(const std::string& name);
std::vector<std::string> verification_law_names();

/// Random (A, B, a, b) around a curved reference; strain sets the perturbation size.
SurfaceStrainInput random_strain_state(std::mt19937& rng, double strain = 0.2);

struct MaterialCheck {
  int states = 0;
  double stress_err = 0;   ///< max rel. error of (tau, M0) against FD of the energy
  double tangent_err = 0;  ///< max rel. error of (c, d, e, f) against FD of (tau, M0)
};
MaterialCheck check_material(const MaterialLaw& law, int n_states, unsigned seed);

/// Rel. error of the element tangent against central differences of the element force.
double element_tangent_error(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law, double h = 1e-6);

/// Rel. error of the global tangent (internal, constraint and load terms, multipliers
/// included) against central differences of the global residual.
double global_tangent_error(const ShellModel& model, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q,
                            double lambda, double h = 1e-6);

struct MeshCheck {
  std::string mesh;
  double err = 0;
};
/// Element tangents on a perturbed hemisphere cap and folded strip, plus the global
/// folded-strip tangent with penalty and multiplier constraints.
std::vector<MeshCheck> check_meshes(const MaterialLaw& law, unsigned seed);

}  // namespace kls
