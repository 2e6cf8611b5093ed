#pragma once

#include "klshell/nurbs.hpp"

#include <map>
#include <string>
#include <vector>

namespace kls {

struct EdgeRef {
  int patch = 0;
  Side side = Side::u0;
  bool operator==(const EdgeRef& o) const { return patch == o.patch && side == o.side; }
};

/// Two patch sides sharing their control points. reversed: the edge
/// parameters run in opposite directions.
struct InterfacePair {
  EdgeRef a, b;
  bool reversed = false;
};

/// Named boundary or point set.
struct NamedSet {
  std::vector<EdgeRef> sides;
  std::vector<std::pair<int, int>> points;  // (patch, control point index)
};

struct MeshElement {
  int patch = 0;
  int local = 0;            // element index inside the patch
  std::vector<int> nodes;   // global node of every local basis function
};

/// Conforming multi-patch NURBS surface with merged global node numbering.
class MultiPatchMesh {
 public:
  std::vector<Patch> patches;
  std::vector<InterfacePair> interfaces;
  std::map<std::string, NamedSet> sets;

  /// Validates patches, merges coincident control points of different patches,
  /// builds element lists and, unless interfaces were given, detects them.
  void finalize();

  int n_nodes() const { return n_nodes_; }
  double bbox_diagonal() const { return diag_; }
  const std::vector<MeshElement>& elements() const { return elements_; }
  const PatchBasis& basis(int patch) const { return bases_.at(patch); }
  int global_node(int patch, int cp) const { return node_of_.at(patch).at(cp); }
  const std::vector<Eigen::Vector3d>& reference_positions() const { return xref_; }
  std::vector<int> side_nodes(const EdgeRef& e) const;
  /// Global nodes of a named set (sides and points), sorted and unique.
  std::vector<int> set_nodes(const std::string& name) const;
  /// Element of patch that owns parametric point (u, v); returns global element index.
  int element_at(int patch, double u, double v) const;
  /// Global element indices adjacent to a patch side, ordered along the edge parameter.
  std::vector<int> side_elements(const EdgeRef& e) const;

 private:
  std::vector<PatchBasis> bases_;
  std::vector<std::vector<int>> node_of_;
  std::vector<int> elem_offset_;
  std::vector<MeshElement> elements_;
  std::vector<Eigen::Vector3d> xref_;
  int n_nodes_ = 0;
  double diag_ = 0.0;
};

/// Parameters of the built-in geometries.
struct PrimitiveSpec {
  std::string kind;  // plate | strip | cylinder | hemisphere
  int degree = 2;
  int n_u = 1, n_v = 1;
  double Lx = 1, Ly = 1;                  // plate / strip
  double R = 1, L = 1;                    // cylinder radius and length
  double phi0 = 0, phi1 = 90;             // circumferential / azimuthal range, degrees
  double polar_min = 0, polar_max = 90;   // hemisphere polar angle range from +z, degrees
};

/// Single-patch plate spanned by origin + s*e1 + t*e2.
Patch make_plate_patch(const Eigen::Vector3d& origin, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2,
                       int degree, int n_u, int n_v);
/// Cylinder patch around the x axis: u = angle (phi0..phi1), v = axial (0..L); outward normal.
Patch make_cylinder_patch(double R, double L, double phi0_deg, double phi1_deg, int degree, int n_u, int n_v);
/// Spherical patch: u = azimuth, v from polar_max toward polar_min (outward normal).
Patch make_sphere_patch(double R, double polar_min_deg, double polar_max_deg, double az0_deg, double az1_deg,
                        int degree, int n_u, int n_v);
MultiPatchMesh make_primitive(const PrimitiveSpec& spec);

}  // namespace kls
