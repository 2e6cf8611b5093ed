#pragma once

#include "klshell/kinematics.hpp"

#include <string>
#include <utility>
#include <variant>

namespace kls {

struct StressState {
  Mat2 tau = Mat2::Zero();  ///< tau^ab
  Mat2 M0 = Mat2::Zero();   ///< M0^ab
};

/// Voigt tangents in component order (11, 22, 12):
/// c = 2 dtau/da, d = dtau/db, e = 2 dM0/da, f = dM0/db.
struct TangentSet {
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
};

struct Koiter {
  double Lambda = 0, mu = 0, T = 0;
};

struct CanhamNH {
  double Lambda = 0, mu = 0, c = 0;
};

/// Neo-Hookean membrane with Koiter bending.
struct MixedKoiterNH {
  double Lambda = 0, mu = 0, T = 0;
};

enum class Law3D { CompressibleNH, IncompressibleNH };
/// metric_weighted: layer stress weighted by the shifter and metric factors; direct: plain thickness moments.
enum class Reduction { metric_weighted, direct };

/// Thickness-integrated 3D Neo-Hookean law under plane stress.
struct Projected {
  Law3D law = Law3D::CompressibleNH;
  double Lambda3 = 0, mu3 = 0;  ///< 3D Lame constants
  double T = 0;
  int n_gauss = 3;
  Reduction reduction = Reduction::metric_weighted;
};

using MaterialLaw = std::variant<Koiter, CanhamNH, MixedKoiterNH, Projected>;

struct ConstitutiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MaterialResponse {
  StressState stress;
  TangentSet tangent;
};

/// Reference (A, B) and current (a, b) covariant metric and curvature.
struct SurfaceStrainInput {
  Mat2 A, B, a, b;
};

MaterialResponse evaluate(const MaterialLaw& law, const SurfaceStrainInput& in, bool with_tangent = true);
MaterialResponse evaluate(const MaterialLaw& law, const ReferenceState& ref, const SurfaceState& cur,
                          bool with_tangent = true);

MaterialResponse evaluate_koiter(const Koiter& m, const SurfaceStrainInput& in);
MaterialResponse evaluate_canham_nh(const CanhamNH& m, const SurfaceStrainInput& in, bool with_tangent = true);
MaterialResponse evaluate_mixed(const MixedKoiterNH& m, const SurfaceStrainInput& in, bool with_tangent = true);
MaterialResponse evaluate_projected(const Projected& m, const SurfaceStrainInput& in, bool with_tangent = true);

/// Strain energy per reference area for the direct 2D laws.
double strain_energy(const MaterialLaw& law, const SurfaceStrainInput& in);

/// Surface Lame parameters (Lambda, mu) from Young's modulus, Poisson ratio and thickness.
std::pair<double, double> lame_2d_from_3d(double E, double nu, double T);
/// 3D Lame parameters (Lambda~, mu~).
std::pair<double, double> lame_3d(double E, double nu);

double solve_lambda3(Law3D law, double Lambda3, double mu3, double Jstar);

std::string law_name(const MaterialLaw& law);

}  // namespace kls
