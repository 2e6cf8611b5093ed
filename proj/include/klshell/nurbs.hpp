#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace kls {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Open (clamped) knot vector of a single parametric direction.
struct KnotVector {
  int degree = 2;
  std::vector<double> knots;

  int n_basis() const { return static_cast<int>(knots.size()) - degree - 1; }
  /// Knot indices i with knots[i] < knots[i+1], i.e. the nonzero spans.
  std::vector<int> span_indices() const;
  int n_spans() const { return static_cast<int>(span_indices().size()); }
  double front() const { return knots.front(); }
  double back() const { return knots.back(); }
  /// Throws GeometryError on ordering, clamping or multiplicity violations.
  void validate() const;
};

KnotVector uniform_knots(int degree, int n_spans, double a = 0.0, double b = 1.0);

struct Bernstein1D {
  Eigen::VectorXd N, dN, ddN;
};

/// Bernstein polynomials of degree p on [0,1] with first and second derivatives.
Bernstein1D bernstein_eval(int p, double t);

/// One (p+1)x(p+1) operator per nonzero span: local B-splines = C^e * Bernstein.
std::vector<Eigen::MatrixXd> build_extraction(const KnotVector& kv);

/// Cox-de Boor evaluation of all basis functions; used for cross-checks.
Eigen::VectorXd cox_de_boor(const KnotVector& kv, double u);

enum class Side { u0 = 0, u1 = 1, v0 = 2, v1 = 3 };
Side side_from_string(const std::string& s);
std::string to_string(Side s);

/// Tensor-product NURBS patch. Control points are stored u-fastest as (x, y, z, w).
struct Patch {
  KnotVector ku, kv;
  int nu = 0, nv = 0;
  std::vector<Eigen::Vector4d> cp;
  std::string id;

  int index(int i, int j) const { return i + nu * j; }
  Eigen::Vector3d position(int k) const { return cp[k].head<3>(); }
  double weight(int k) const { return cp[k][3]; }
  int n_elements() const { return ku.n_spans() * kv.n_spans(); }
  void validate() const;

  /// Surface point at (u, v) evaluated by Cox-de Boor.
  Eigen::Vector3d point(double u, double v) const;
  /// Control point indices along a side, ordered by increasing edge parameter.
  std::vector<int> side_indices(Side s) const;
};

/// Element of a patch: a nonzero knot span pair.
struct PatchElement {
  int eu = 0, ev = 0;        // span counters
  int first_u = 0, first_v = 0;  // first nonzero basis index in each direction
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
};

std::vector<PatchElement> patch_elements(const Patch& p);

/// Rational basis values and parametric derivatives on one element.
/// ddN columns: d2/du2, d2/dv2, d2/dudv.
struct BasisEval {
  Eigen::VectorXd N;
  Eigen::MatrixXd dN;
  Eigen::MatrixXd ddN;
  int element = -1;
  Eigen::Vector2d xi = Eigen::Vector2d::Zero();
};

/// Cached extraction operators of a patch.
class PatchBasis {
 public:
  explicit PatchBasis(const Patch& p);
  const std::vector<PatchElement>& elements() const { return elems_; }
  /// Local control point indices (patch numbering) of an element, u-fastest.
  std::vector<int> local_indices(int e) const;
  BasisEval eval(int e, double u, double v) const;
  /// Element that contains (u, v); upper boundary belongs to the last span.
  int find_element(double u, double v) const;

 private:
  Patch patch_;
  std::vector<PatchElement> elems_;
  std::vector<Eigen::MatrixXd> cu_, cv_;
  int nsu_ = 0, nsv_ = 0;
};

/// Insert a knot into direction 0 (u) or 1 (v) keeping the geometry.
Patch insert_knot(const Patch& p, int dir, double knot);
/// Uniform knot insertion to reach nu x nv elements.
Patch refine(const Patch& p, int n_u, int n_v);
/// Bezier degree elevation of a single-span patch in homogeneous coordinates.
Patch elevate_bezier(const Patch& p, int degree_u, int degree_v);
/// Skewed parametrization of an affine planar patch; shift along u.
Patch make_skew_mesh(const Patch& p, double r);

}  // namespace kls
