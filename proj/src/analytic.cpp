#include "klshell/analytic.hpp"

#include <cmath>
#include <stdexcept>

namespace kls {

namespace {
const double kPi = std::acos(-1.0);

/// Gaussian elimination with partial pivoting.
Eigen::Vector3d solve3(Eigen::Matrix3d A, Eigen::Vector3d b, bool& singular) {
  singular = false;
  const double scale = A.cwiseAbs().maxCoeff();
  for (int c = 0; c < 3; ++c) {
    int p = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(A(r, c)) > std::abs(A(p, c))) p = r;
    if (!(std::abs(A(p, c)) > 1e-14 * scale)) {
      singular = true;
      return Eigen::Vector3d::Zero();
    }
    A.row(c).swap(A.row(p));
    std::swap(b[c], b[p]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = A(r, c) / A(c, c);
      A.row(r) -= f * A.row(c);
      b[r] -= f * b[c];
    }
  }
  Eigen::Vector3d x;
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= A(r, c) * x[c];
    x[r] = s / A(r, r);
  }
  return x;
}
}  // namespace

double navier_plate_wmax(double p0, double L, double E, double nu, double T) {
  if (!(L > 0) || !(E > 0) || !(T > 0)) throw std::invalid_argument("plate: L, E and T must be positive");
  const double D = E * T * T * T / (12.0 * (1.0 - nu * nu));
  return p0 * std::pow(L, 4) / (4.0 * std::pow(kPi, 4) * D);
}

Eigen::Vector3d flugge_mode(const FluggeSolution& s, int m, int n) {
  if (n % 2 == 0) return Eigen::Vector3d::Zero();
  const double k = s.T * s.T / (12.0 * s.R * s.R);
  const double d = s.E * s.T / (1.0 - s.nu * s.nu);
  const double lam = n * kPi * s.R / s.L;
  const double Mm = static_cast<double>(s.N_f) * m;
  const double nu = s.nu;
  const double sign = ((n - 1) / 2) % 2 == 0 ? 1.0 : -1.0;
  const double p = sign * s.N_f * (m == 0 ? 1.0 : 2.0) * s.P / (kPi * s.R * s.L);
  const double l2 = lam * lam, M2 = Mm * Mm;
  const double a13 = -nu * lam - k * (l2 * lam - 0.5 * (1 - nu) * lam * M2);
  const double a12 = -0.5 * (1 + nu) * lam * Mm;
  const double a23 = Mm + 0.5 * (3 - nu) * k * l2 * Mm;
  Eigen::Matrix3d A;
  A << l2 + 0.5 * (1 - nu) * M2 * (1 + k), a12, a13,  //
      a12, M2 + 0.5 * (1 - nu) * l2 * (1 + 3 * k), a23,  //
      a13, a23, 1 + k * (l2 * l2 + 2 * l2 * M2 + M2 * M2 - 2 * M2 + 1);
  bool singular = false;
  const Eigen::Vector3d x = solve3(A, Eigen::Vector3d(0, 0, p * s.R * s.R / d), singular);
  if (singular)
    throw std::runtime_error("singular Fourier mode (m, n) = (" + std::to_string(m) + ", " + std::to_string(n) + ")");
  return x;
}

FluggeResult flugge_pinched_cylinder(const FluggeSolution& s, double x, double phi) {
  if (s.M < 1 || s.N < 1) throw std::invalid_argument("truncation orders must be >= 1");
  FluggeResult res;
  int quiet = 0;
  for (int j = 0; j < s.N; ++j) {
    const int n = 2 * j + 1;
    const double ax = n * kPi * x / s.L;
    const double cx = std::cos(ax), sx = std::sin(ax);
    Eigen::Vector3d col = Eigen::Vector3d::Zero();
    for (int m = 0; m < s.M; ++m) {
      const Eigen::Vector3d c = flugge_mode(s, m, n);
      const double ap = static_cast<double>(s.N_f) * m * phi;
      col += Eigen::Vector3d(c[0] * std::cos(ap) * cx, c[1] * std::sin(ap) * sx, c[2] * std::cos(ap) * sx);
    }
    res.uvw += col;
    res.n_orders = j + 1;
    if (s.early_stop) {
      quiet = std::abs(col[2]) < s.stop_tol * std::abs(res.uvw[2]) ? quiet + 1 : 0;
      if (quiet >= s.stop_window) {
        res.stopped_early = j + 1 < s.N;
        break;
      }
    }
  }
  return res;
}

FluggeResult flugge_load_point(const FluggeSolution& s) {
  FluggeResult r = flugge_pinched_cylinder(s, 0.5 * s.L, 0.0);
  r.uvw[2] = std::abs(r.uvw[2]);
  return r;
}

double PureBendingSolution::a0() const {
  const double t = M * M / (2.0 * mu * c);
  return t + std::sqrt(t * t + 1.0);
}

double PureBendingSolution::lambda1() const {
  const double a = a0(), mb = mu / (2.0 * Lambda);
  const double q = a * a + 1.0;
  return std::sqrt(-mb * q + std::sqrt(mb * mb * q * q + a * a * (4.0 * mb + 1.0)));
}

PureBendingStrip::PureBendingStrip(const PureBendingSolution& sol, double S1, double S2, double W, double beta)
    : sol_(sol), S1_(S1), S2_(S2), W_(W), beta_(beta), k_(sol.kappa1()), l1_(sol.lambda1()), l2_(sol.lambda2()) {
  if (sol.M < 0) throw std::invalid_argument("pure bending: M must be non-negative");
}

Eigen::Vector3d PureBendingStrip::reference(double X, double Y) const {
  if (X <= S1_) return {X, Y, 0.0};
  const double t = X - S1_;
  return {S1_ + t * std::cos(beta_), Y, t * std::sin(beta_)};
}

Eigen::Vector2d PureBendingStrip::coordinates(const Eigen::Vector3d& P) const {
  if (beta_ == 0.0 || std::abs(P.z()) <= 1e-12 * length()) return {P.x(), P.y()};
  const Eigen::Vector2d q(P.x() - S1_, P.z());
  return {S1_ + q.dot(Eigen::Vector2d(std::cos(beta_), std::sin(beta_))), P.y()};
}

Eigen::Vector3d PureBendingStrip::current(double X, double Y) const {
  // arc in the x-z plane with tangent angle psi(s) = k l1 s, plus the kink after S1
  auto arc = [&](double s0, double s1, double psi0, double& x, double& z) {
    if (k_ == 0.0) {
      x += l1_ * (s1 - s0) * std::cos(psi0);
      z += l1_ * (s1 - s0) * std::sin(psi0);
      return;
    }
    const double p1 = psi0 + k_ * l1_ * (s1 - s0);
    x += (std::sin(p1) - std::sin(psi0)) / k_;
    z += (std::cos(psi0) - std::cos(p1)) / k_;
  };
  double x = 0, z = 0;
  if (X <= S1_) {
    arc(0.0, X, 0.0, x, z);
  } else {
    arc(0.0, S1_, 0.0, x, z);
    arc(S1_, X, k_ * l1_ * S1_ + beta_, x, z);
  }
  return {x, l2_ * Y, z};
}

Eigen::Vector3d PureBendingStrip::displacement(const Eigen::Vector3d& P) const {
  const Eigen::Vector2d c = coordinates(P);
  return current(c[0], c[1]) - P;
}

double PureBendingStrip::mean_curvature(double X) const {
  const double psi = k_ * l1_ * X + (X > S1_ ? beta_ : 0.0);
  const Eigen::Vector3d aX = l1_ * Eigen::Vector3d(std::cos(psi), 0, std::sin(psi));
  const Eigen::Vector3d aY(0, l2_, 0);
  const Eigen::Vector3d aXX = l1_ * l1_ * k_ * Eigen::Vector3d(-std::sin(psi), 0, std::cos(psi));
  const Eigen::Vector3d n = aX.cross(aY).normalized();
  // a12 = b12 = b22 = 0
  return 0.5 * n.dot(aXX) / aX.squaredNorm();
}

double l2_displacement_error(const std::vector<ElementCache>& cache, const Eigen::MatrixX3d& X,
                             const Eigen::MatrixX3d& x,
                             const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& exact_u) {
  double err = 0, area = 0;
  for (const ElementCache& el : cache) {
    const NodalPositions Xe = gather(el.nodes, X), xe = gather(el.nodes, x);
    for (const QuadPoint& qp : el.qp) {
      const Eigen::Vector3d P = Xe.transpose() * qp.basis.N;
      const Eigen::Vector3d uh = xe.transpose() * qp.basis.N - P;
      err += (uh - exact_u(P)).squaredNorm() * qp.dA;
      area += qp.dA;
    }
  }
  return std::sqrt(err / area);
}

}  // namespace kls
