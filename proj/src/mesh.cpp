#include "klshell/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kls {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Arc {
  std::array<Eigen::Vector2d, 3> p;
  std::array<double, 3> w;
};

// Rational quadratic circular arc of unit radius between two angles.
Arc unit_arc(double t0, double t1) {
  if (!(t1 > t0) || t1 - t0 > M_PI + 1e-14) throw GeometryError("arc: angle span must lie in (0, 180] degrees");
  const double h = 0.5 * (t1 - t0), tm = 0.5 * (t0 + t1);
  Arc a;
  a.p[0] = {std::cos(t0), std::sin(t0)};
  a.p[1] = Eigen::Vector2d(std::cos(tm), std::sin(tm)) / std::cos(h);
  a.p[2] = {std::cos(t1), std::sin(t1)};
  a.w = {1.0, std::cos(h), 1.0};
  return a;
}

Patch quadratic_bezier_patch() {
  Patch p;
  p.ku = uniform_knots(2, 1);
  p.kv = uniform_knots(2, 1);
  p.nu = 3;
  p.nv = 3;
  p.cp.assign(9, Eigen::Vector4d::Zero());
  return p;
}

Patch finish(Patch p, int degree, int n_u, int n_v) {
  if (degree < 2 || degree > 5) throw GeometryError("primitive: degree must lie in [2,5]");
  if (n_u < 1 || n_v < 1) throw GeometryError("primitive: element counts must be positive");
  p = elevate_bezier(p, degree, degree);
  return refine(p, n_u, n_v);
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

Patch make_plate_patch(const Eigen::Vector3d& origin, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2,
                       int degree, int n_u, int n_v) {
  if (e1.norm() <= 0 || e2.norm() <= 0) throw GeometryError("plate: nonpositive dimension");
  Patch p = quadratic_bezier_patch();
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) p.cp[p.index(i, j)] << origin + 0.5 * i * e1 + 0.5 * j * e2, 1.0;
  return finish(p, degree, n_u, n_v);
}

Patch make_cylinder_patch(double R, double L, double phi0_deg, double phi1_deg, int degree, int n_u, int n_v) {
  if (!(R > 0) || !(L > 0)) throw GeometryError("cylinder: nonpositive dimension");
  const Arc arc = unit_arc(phi0_deg * kDeg, phi1_deg * kDeg);
  Patch p = quadratic_bezier_patch();
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      p.cp[p.index(i, j)] << 0.5 * j * L, R * arc.p[i].x(), R * arc.p[i].y(), arc.w[i];
  return finish(p, degree, n_u, n_v);
}

Patch make_sphere_patch(double R, double polar_min_deg, double polar_max_deg, double az0_deg, double az1_deg,
                        int degree, int n_u, int n_v) {
  if (!(R > 0)) throw GeometryError("sphere: nonpositive radius");
  if (polar_min_deg < 0 || polar_max_deg > 180 || !(polar_max_deg > polar_min_deg))
    throw GeometryError("sphere: invalid polar range");
  const Arc az = unit_arc(az0_deg * kDeg, az1_deg * kDeg);
  // Meridian in the (r, z) plane by latitude; v runs toward the +z pole.
  const Arc mer = unit_arc((90.0 - polar_max_deg) * kDeg, (90.0 - polar_min_deg) * kDeg);
  Patch p = quadratic_bezier_patch();
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      const double r = R * mer.p[j].x(), z = R * mer.p[j].y();
      p.cp[p.index(i, j)] << r * az.p[i].x(), r * az.p[i].y(), z, az.w[i] * mer.w[j];
    }
  return finish(p, degree, n_u, n_v);
}

MultiPatchMesh make_primitive(const PrimitiveSpec& s) {
  MultiPatchMesh m;
  if (s.kind == "plate" || s.kind == "strip") {
    if (!(s.Lx > 0) || !(s.Ly > 0)) throw GeometryError("plate: nonpositive dimension");
    m.patches.push_back(make_plate_patch(Eigen::Vector3d::Zero(), Eigen::Vector3d(s.Lx, 0, 0),
                                         Eigen::Vector3d(0, s.Ly, 0), s.degree, s.n_u, s.n_v));
  } else if (s.kind == "cylinder") {
    m.patches.push_back(make_cylinder_patch(s.R, s.L, s.phi0, s.phi1, s.degree, s.n_u, s.n_v));
  } else if (s.kind == "hemisphere") {
    m.patches.push_back(make_sphere_patch(s.R, s.polar_min, s.polar_max, s.phi0, s.phi1, s.degree, s.n_u, s.n_v));
  } else {
    throw GeometryError("unknown primitive '" + s.kind + "'");
  }
  m.patches.back().id = s.kind;
  m.finalize();
  return m;
}

void MultiPatchMesh::finalize() {
  if (patches.empty()) throw GeometryError("mesh has no patches");
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), hi = -lo;
  for (auto& p : patches) {
    p.validate();
    for (const auto& q : p.cp) {
      lo = lo.cwiseMin(q.head<3>());
      hi = hi.cwiseMax(q.head<3>());
    }
  }
  diag_ = (hi - lo).norm();
  const double tol = 1e-9 * diag_;

  // Candidate nodes: boundary control points; merge only across patches.
  std::vector<int> offset(patches.size() + 1, 0);
  for (size_t k = 0; k < patches.size(); ++k) offset[k + 1] = offset[k] + static_cast<int>(patches[k].cp.size());
  UnionFind uf(offset.back());
  struct Cand {
    double x;
    int patch, cp;
  };
  std::vector<Cand> cand;
  for (size_t k = 0; k < patches.size(); ++k)
    for (Side s : {Side::u0, Side::u1, Side::v0, Side::v1})
      for (int c : patches[k].side_indices(s)) cand.push_back({patches[k].cp[c][0], static_cast<int>(k), c});
  std::sort(cand.begin(), cand.end(), [](const Cand& a, const Cand& b) { return a.x < b.x; });
  for (size_t i = 0; i < cand.size(); ++i)
    for (size_t j = i + 1; j < cand.size() && cand[j].x - cand[i].x <= tol; ++j) {
      if (cand[i].patch == cand[j].patch) continue;
      const auto& a = patches[cand[i].patch].cp[cand[i].cp];
      const auto& b = patches[cand[j].patch].cp[cand[j].cp];
      if ((a.head<3>() - b.head<3>()).norm() <= tol)
        uf.unite(offset[cand[i].patch] + cand[i].cp, offset[cand[j].patch] + cand[j].cp);
    }
  std::vector<int> id(offset.back(), -1);
  node_of_.assign(patches.size(), {});
  xref_.clear();
  n_nodes_ = 0;
  for (size_t k = 0; k < patches.size(); ++k) {
    node_of_[k].resize(patches[k].cp.size());
    for (size_t c = 0; c < patches[k].cp.size(); ++c) {
      const int root = uf.find(offset[k] + static_cast<int>(c));
      if (id[root] < 0) {
        id[root] = n_nodes_++;
        xref_.push_back(patches[k].cp[c].head<3>());
      }
      node_of_[k][c] = id[root];
    }
  }

  bases_.clear();
  elements_.clear();
  elem_offset_.assign(1, 0);
  for (size_t k = 0; k < patches.size(); ++k) {
    bases_.emplace_back(patches[k]);
    const auto& pb = bases_.back();
    for (int e = 0; e < static_cast<int>(pb.elements().size()); ++e) {
      MeshElement me;
      me.patch = static_cast<int>(k);
      me.local = e;
      for (int c : pb.local_indices(e)) me.nodes.push_back(node_of_[k][c]);
      elements_.push_back(std::move(me));
    }
    elem_offset_.push_back(static_cast<int>(elements_.size()));
  }

  if (interfaces.empty()) {
    for (size_t a = 0; a < patches.size(); ++a)
      for (size_t b = a + 1; b < patches.size(); ++b)
        for (Side sa : {Side::u0, Side::u1, Side::v0, Side::v1})
          for (Side sb : {Side::u0, Side::u1, Side::v0, Side::v1}) {
            const auto na = side_nodes({static_cast<int>(a), sa}), nb = side_nodes({static_cast<int>(b), sb});
            if (na.size() != nb.size()) continue;
            if (na == nb) {
              interfaces.push_back({{static_cast<int>(a), sa}, {static_cast<int>(b), sb}, false});
            } else if (std::equal(na.begin(), na.end(), nb.rbegin())) {
              interfaces.push_back({{static_cast<int>(a), sa}, {static_cast<int>(b), sb}, true});
            }
          }
  } else {
    for (auto& itf : interfaces) {
      const auto na = side_nodes(itf.a), nb = side_nodes(itf.b);
      if (na == nb)
        itf.reversed = false;
      else if (na.size() == nb.size() && std::equal(na.begin(), na.end(), nb.rbegin()))
        itf.reversed = true;
      else
        throw GeometryError("interface between patches " + std::to_string(itf.a.patch) + " and " +
                            std::to_string(itf.b.patch) + " is not conforming");
    }
  }
  for (const auto& [name, set] : sets) {
    for (const auto& e : set.sides)
      if (e.patch < 0 || e.patch >= static_cast<int>(patches.size()))
        throw GeometryError("set '" + name + "' references a missing patch");
    for (const auto& [p, c] : set.points)
      if (p < 0 || p >= static_cast<int>(patches.size()) || c < 0 || c >= static_cast<int>(patches[p].cp.size()))
        throw GeometryError("set '" + name + "' references a missing control point");
  }
}

std::vector<int> MultiPatchMesh::side_nodes(const EdgeRef& e) const {
  std::vector<int> out;
  for (int c : patches.at(e.patch).side_indices(e.side)) out.push_back(node_of_.at(e.patch)[c]);
  return out;
}

std::vector<int> MultiPatchMesh::set_nodes(const std::string& name) const {
  auto it = sets.find(name);
  if (it == sets.end()) throw GeometryError("unknown set '" + name + "'");
  std::vector<int> out;
  for (const auto& e : it->second.sides) {
    auto n = side_nodes(e);
    out.insert(out.end(), n.begin(), n.end());
  }
  for (const auto& [p, c] : it->second.points) out.push_back(global_node(p, c));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int MultiPatchMesh::element_at(int patch, double u, double v) const {
  return elem_offset_.at(patch) + bases_.at(patch).find_element(u, v);
}

std::vector<int> MultiPatchMesh::side_elements(const EdgeRef& e) const {
  const Patch& p = patches.at(e.patch);
  const int nsu = p.ku.n_spans(), nsv = p.kv.n_spans();
  std::vector<int> out;
  const int base = elem_offset_.at(e.patch);
  switch (e.side) {
    case Side::u0:
      for (int b = 0; b < nsv; ++b) out.push_back(base + b * nsu);
      break;
    case Side::u1:
      for (int b = 0; b < nsv; ++b) out.push_back(base + b * nsu + nsu - 1);
      break;
    case Side::v0:
      for (int a = 0; a < nsu; ++a) out.push_back(base + a);
      break;
    case Side::v1:
      for (int a = 0; a < nsu; ++a) out.push_back(base + (nsv - 1) * nsu + a);
      break;
  }
  return out;
}

}  // namespace kls
