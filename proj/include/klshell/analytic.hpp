#pragma once

#include "klshell/element.hpp"

#include <functional>

namespace kls {

/// Center deflection of a simply supported square plate under p0 sin(pi x/L) sin(pi y/L).
double navier_plate_wmax(double p0, double L, double E, double nu, double T);

/// Pinched cylinder with rigid end diaphragms, double Fourier series.
/// M: circumferential orders m = 0..M-1; N: number of odd axial orders n = 1, 3, ..., 2N-1.
struct FluggeSolution {
  double R = 300, L = 600, T = 3, E = 3e6, nu = 0.3;
  int N_f = 2;
  double P = 1;
  int M = 80, N = 80;
  /// Stop once the radial increment of an axial order stays below stop_tol times the
  /// partial sum for stop_window consecutive orders.
  bool early_stop = false;
  double stop_tol = 1e-12;
  int stop_window = 50;
};

struct FluggeResult {
  Eigen::Vector3d uvw = Eigen::Vector3d::Zero();  ///< axial, circumferential, radial
  int n_orders = 0;                                ///< odd axial orders summed
  bool stopped_early = false;
};

/// Coefficients (u_mn, v_mn, w_mn) of one mode; throws std::runtime_error if singular.
Eigen::Vector3d flugge_mode(const FluggeSolution& s, int m, int n);
FluggeResult flugge_pinched_cylinder(const FluggeSolution& s, double x, double phi);
/// Radial deflection magnitude under the load (x = L/2, phi = 0).
FluggeResult flugge_load_point(const FluggeSolution& s);

/// Strip bent by end moments M under the Canham + Neo-Hooke law.
struct PureBendingSolution {
  double mu = 10, Lambda = 5, c = 1, M = 1;
  double kappa1() const { return M / c; }
  double a0() const;
  double lambda1() const;
  double lambda2() const { return lambda1() / a0(); }
};

/// Strip of width W (along y) whose centerline runs along x for S1, then turns
/// by beta about the y axis and continues for S2. beta = 0: flat strip.
/// The edge X = 0 stays at its reference location with horizontal tangent; the
/// point (0, 0) is fixed in y; bending is toward +z.
class PureBendingStrip {
 public:
  PureBendingStrip(const PureBendingSolution& sol, double S1, double S2, double W, double beta = 0.0);

  /// Reference point from strip coordinates (X along the centerline, Y across).
  Eigen::Vector3d reference(double X, double Y) const;
  /// Strip coordinates of a reference point.
  Eigen::Vector2d coordinates(const Eigen::Vector3d& P) const;
  Eigen::Vector3d current(double X, double Y) const;
  Eigen::Vector3d displacement(const Eigen::Vector3d& P) const;
  /// Mean curvature of the current surface from the analytic parametrization.
  double mean_curvature(double X) const;
  double length() const { return S1_ + S2_; }

 private:
  PureBendingSolution sol_;
  double S1_, S2_, W_, beta_;
  double k_, l1_, l2_;
};

/// sqrt( (1/A) int |u_h - u|^2 dA ) over the reference surface, A = reference area.
double l2_displacement_error(const std::vector<ElementCache>& cache, const Eigen::MatrixX3d& X,
                             const Eigen::MatrixX3d& x,
                             const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& exact_u);

}  // namespace kls
