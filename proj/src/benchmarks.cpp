#include "klshell/benchmarks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <set>

namespace kls {

namespace {

constexpr double NaN = std::numeric_limits<double>::quiet_NaN();

double param(const BenchmarkCase& c, const char* key) {
  if (!c.params.contains(key)) throw ConfigError(c.id + ": missing parameter '" + key + "'");
  if (!c.params.at(key).is_number()) throw ConfigError(c.id + ": parameter '" + key + "' must be a number");
  return c.params.at(key).get<double>();
}

double param(const BenchmarkCase& c, const char* key, double def) { return c.params.contains(key) ? param(c, key) : def; }

std::string sparam(const BenchmarkCase& c, const char* key, const std::string& def) {
  if (!c.params.contains(key)) return def;
  if (!c.params.at(key).is_string()) throw ConfigError(c.id + ": parameter '" + key + "' must be a string");
  return c.params.at(key).get<std::string>();
}

MaterialLaw shell_material(const BenchmarkCase& c, const std::string& model) {
  if (model == "canham_nh") return CanhamNH{param(c, "Lambda"), param(c, "mu"), param(c, "c")};
  const double E = param(c, "E"), nu = param(c, "nu"), T = param(c, "T");
  if (model == "koiter" || model == "mixed") {
    const auto [L, mu] = lame_2d_from_3d(E, nu, T);
    if (model == "koiter") return Koiter{L, mu, T};
    return MixedKoiterNH{L, mu, T};
  }
  if (model == "projected_nh") {
    const auto [L3, mu3] = lame_3d(E, nu);
    return Projected{Law3D::CompressibleNH, L3, mu3, T, 3, Reduction::metric_weighted};
  }
  if (model == "projected_nh_incompressible")
    return Projected{Law3D::IncompressibleNH, 0.0, E / (2 * (1 + nu)), T, 3, Reduction::metric_weighted};
  throw ConfigError(c.id + ": unknown model '" + model + "'");
}

DirichletBC fix_nodes(std::vector<int> nodes, bool fx, bool fy, bool fz) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  DirichletBC bc;
  bc.nodes = std::move(nodes);
  bc.fix = {fx, fy, fz};
  return bc;
}

DirichletBC fix_side(const MultiPatchMesh& m, int patch, Side s, bool fx, bool fy, bool fz) {
  return fix_nodes(m.side_nodes({patch, s}), fx, fy, fz);
}

EdgeConstraint symmetry(int patch, Side s, const Eigen::Vector3d& normal, const ConstraintMethod& method) {
  EdgeConstraint c;
  c.kind = ConstraintKind::symmetry;
  c.method = method;
  c.edges = {{patch, s}};
  c.plane_normal = normal;
  return c;
}

ConstraintMethod penalty(double eps) {
  ConstraintMethod m;
  m.epsilon = eps;
  return m;
}

ConstraintMethod method_from_params(const BenchmarkCase& c, double eps) {
  ConstraintMethod m;
  const std::string method = sparam(c, "method", "penalty");
  if (method == "lagrange") {
    m.lagrange = true;
    const std::string interp = sparam(c, "interp", "N2Q0");
    if (interp == "N2Q1c")
      m.interp = LMInterp::N2Q1c;
    else if (interp != "N2Q0")
      throw ConfigError(c.id + ": unknown interpolation '" + interp + "'");
  } else if (method == "penalty") {
    m.epsilon = eps;
  } else {
    throw ConfigError(c.id + ": unknown method '" + method + "'");
  }
  return m;
}

std::function<std::vector<Measurement>(const ShellModel&, const Eigen::MatrixX3d&, const Eigen::VectorXd&)> probes(
    std::vector<std::tuple<std::string, int, double, double, Eigen::Vector3d>> list) {
  return [list](const ShellModel& m, const Eigen::MatrixX3d& x, const Eigen::VectorXd&) {
    std::vector<Measurement> out;
    for (const auto& [name, patch, u, v, dir] : list)
      out.push_back({name, probe_displacement(m.mesh, x, patch, u, v).dot(dir)});
    return out;
  };
}

int level_n2(const Level& l, int def) { return l.n2 > 0 ? l.n2 : def; }

// ---------------------------------------------------------------- linear cases

/// Quarter hemisphere. u0: plane Y = 0, u1: plane X = 0, v0: equator, v1: pole or hole.
BenchmarkInstance hemisphere(const BenchmarkCase& c, const Level& l, const std::string& model) {
  const double R = param(c, "R"), E = param(c, "E"), F = param(c, "F");
  const double hole = param(c, "hole_deg", 0.0);
  BenchmarkInstance in;
  ShellModel& m = in.model;
  m.mesh.patches.push_back(refine(make_sphere_patch(R, hole, 90.0, 0.0, 90.0, l.degree, 1, 1), l.n, level_n2(l, l.n)));
  m.mesh.finalize();
  m.materials = {shell_material(c, model)};
  const ConstraintMethod pm = penalty(param(c, "eps_factor") * E);
  m.constraint_defs = {symmetry(0, Side::u0, Eigen::Vector3d::UnitY(), pm),
                       symmetry(0, Side::u1, Eigen::Vector3d::UnitX(), pm)};
  m.dirichlet.push_back(fix_side(m.mesh, 0, Side::u0, false, true, false));
  m.dirichlet.push_back(fix_side(m.mesh, 0, Side::u1, true, false, false));
  if (hole > 0) {
    // one node of the hole rim removes the vertical rigid translation
    m.dirichlet.push_back(fix_nodes({m.mesh.side_nodes({0, Side::v1}).front()}, false, false, true));
  } else {
    m.dirichlet.push_back(fix_side(m.mesh, 0, Side::v1, true, true, true));
  }
  m.loads.points = {{0, 0.0, 0.0, Eigen::Vector3d(F / 2, 0, 0)}, {0, 1.0, 0.0, Eigen::Vector3d(0, -F / 2, 0)}};
  in.measure = probes({{"uA", 0, 0.0, 0.0, Eigen::Vector3d::UnitX()}, {"uB", 0, 1.0, 0.0, -Eigen::Vector3d::UnitY()}});
  return in;
}

/// Quarter plate [0, L/2]^2; u0 / v0 simply supported, u1 / v1 symmetry planes.
BenchmarkInstance navier_plate(const BenchmarkCase& c, const Level& l, const std::string& model) {
  const double L = param(c, "L"), E = param(c, "E"), p0 = param(c, "p0");
  BenchmarkInstance in;
  ShellModel& m = in.model;
  m.mesh.patches.push_back(make_plate_patch(Eigen::Vector3d::Zero(), Eigen::Vector3d(L / 2, 0, 0),
                                            Eigen::Vector3d(0, L / 2, 0), l.degree, l.n, l.n));
  m.mesh.finalize();
  m.materials = {shell_material(c, model)};
  const ConstraintMethod pm = penalty(param(c, "eps_factor") * std::pow(l.n, l.degree - 1) * E);
  m.constraint_defs = {symmetry(0, Side::u1, Eigen::Vector3d::UnitX(), pm),
                       symmetry(0, Side::v1, Eigen::Vector3d::UnitY(), pm)};
  m.dirichlet = {fix_side(m.mesh, 0, Side::u0, false, false, true), fix_side(m.mesh, 0, Side::v0, false, false, true),
                 fix_side(m.mesh, 0, Side::u1, true, false, false), fix_side(m.mesh, 0, Side::v1, false, true, false)};
  PressureLoad p;
  p.p = p0;
  p.follower = false;
  p.profile = PressureProfile::sinusoidal;
  p.Lx = p.Ly = L;
  m.loads.pressures = {p};
  in.measure = probes({{"w_center", 0, 1.0, 1.0, Eigen::Vector3d::UnitZ()}});
  in.references["w_center"] = navier_plate_wmax(p0, L, E, param(c, "nu"), param(c, "T"));
  return in;
}

double flugge_reference(const FluggeSolution& s) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, double, double, double, int>, double> cache;
  const auto key = std::make_tuple(s.R, s.L, s.T, s.E, s.nu, s.M);
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, flugge_load_point(s).uvw.z()).first;
  return std::abs(it->second);
}

/// Eighth of a cylinder around x: u = angle 0..90 deg (u0 in z = 0, u1 in y = 0),
/// v = axial 0..L/2 (v0 at the end, v1 at the midplane). Load at (u, v) = (1, 1) along -z.
/// end: "diaphragm" fixes y, z at v0; "free" leaves it free.
BenchmarkInstance cylinder(const BenchmarkCase& c, const Level& l, const std::string& model, bool linear_recipe) {
  const double R = param(c, "R"), L = param(c, "L"), E = param(c, "E"), F = param(c, "F");
  const int nt = l.n, nl = level_n2(l, l.n);
  const std::string end = sparam(c, "end", "diaphragm");
  const double sign = sparam(c, "load", "pinch") == "pinch" ? -1.0 : 1.0;
  BenchmarkInstance in;
  ShellModel& m = in.model;
  m.mesh.patches.push_back(make_cylinder_patch(R, L / 2, 0.0, 90.0, l.degree, nt, nl));
  m.mesh.finalize();
  m.materials = {shell_material(c, model)};
  ConstraintMethod axial, circ;
  if (linear_recipe) {
    axial = penalty(param(c, "eps_factor") * std::pow(nl, l.degree - 1) * E);
    circ = penalty(param(c, "eps_factor") * std::pow(nt, l.degree - 1) * E);
  } else {
    axial = method_from_params(c, param(c, "eps_factor", 0.0) * E / L);
    circ = method_from_params(c, param(c, "eps_factor", 0.0) * E / (M_PI * R));
  }
  m.constraint_defs = {symmetry(0, Side::u0, Eigen::Vector3d::UnitZ(), axial),
                       symmetry(0, Side::u1, Eigen::Vector3d::UnitY(), axial),
                       symmetry(0, Side::v1, Eigen::Vector3d::UnitX(), circ)};
  m.dirichlet = {fix_side(m.mesh, 0, Side::u0, false, false, true), fix_side(m.mesh, 0, Side::u1, false, true, false),
                 fix_side(m.mesh, 0, Side::v1, true, false, false)};
  if (end == "diaphragm")
    m.dirichlet.push_back(fix_side(m.mesh, 0, Side::v0, false, true, true));
  else if (end != "free")
    throw ConfigError(c.id + ": unknown end condition '" + end + "'");
  m.loads.points = {{0, 1.0, 1.0, Eigen::Vector3d(0, 0, sign * F / 4)}};
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ(), ey = Eigen::Vector3d::UnitY();
  if (end == "diaphragm") {
    in.measure = probes({{"wA", 0, 1.0, 1.0, sign * ez}, {"wB", 0, 0.0, 1.0, ey}});
  } else {
    in.measure = probes({{"wA", 0, 1.0, 1.0, sign * ez}, {"wB", 0, 1.0, 0.0, -ez}, {"wC", 0, 0.0, 0.0, ey}});
  }
  if (linear_recipe) {
    FluggeSolution s;
    s.R = R;
    s.L = L;
    s.T = param(c, "T");
    s.E = E;
    s.nu = param(c, "nu");
    s.P = F;
    s.M = s.N = static_cast<int>(param(c, "fourier_terms", 8192));
    s.early_stop = true;
    in.references["wA"] = flugge_reference(s);
  }
  return in;
}

// ---------------------------------------------------------------- bending strips

/// Flat or folded strip bent by a live end moment; reference solution from PureBendingStrip.
BenchmarkInstance bending_strip(const BenchmarkCase& c, const Level& l, const std::string& model, bool folded) {
  PureBendingSolution sol;
  sol.mu = param(c, "mu");
  sol.Lambda = param(c, "Lambda");
  sol.c = param(c, "c");
  sol.M = param(c, "M");
  const double W = param(c, "W");
  const double skew = param(c, "skew", 0.0);
  BenchmarkInstance in;
  ShellModel& m = in.model;
  std::vector<double> xb, yb;
  int n_along, n_across;
  double S1, S2, beta = 0;
  if (folded) {
    const double S = param(c, "S");
    const int np_along = static_cast<int>(param(c, "patches_along", 4));
    const int np_across = static_cast<int>(param(c, "patches_across", 2));
    const int kink_after = static_cast<int>(param(c, "kink_after", 3));
    S1 = S * kink_after / np_along;
    S2 = S - S1;
    beta = param(c, "beta");
    for (int i = 0; i <= np_along; ++i) xb.push_back(S * i / np_along);
    for (int j = 0; j <= np_across; ++j) yb.push_back(W * j / np_across);
    n_along = l.n;
    n_across = level_n2(l, std::max(1, l.n / 2));
  } else {
    S1 = param(c, "S");
    S2 = 0;
    const std::string variant = sparam(c, "variant", "single");
    const int n_S = l.n, n_L = level_n2(l, std::max(1, l.n / 2));
    if (variant == "single") {
      xb = {0, S1};
      n_along = n_S;
    } else if (variant == "two_patch") {
      if (n_S % 2) throw ConfigError(c.id + ": two-patch strips need an even element count along");
      xb = {0, S1 / 2, S1};
      n_along = n_S / 2;
    } else {
      throw ConfigError(c.id + ": unknown variant '" + variant + "'");
    }
    yb = {0, W};
    n_across = n_L;
  }
  const PureBendingStrip geo(sol, S1, S2, W, beta);
  m.mesh = make_strip_mesh(geo, xb, yb, l.degree, n_along, n_across, skew);
  m.materials = {shell_material(c, model)};

  std::vector<InterfacePair> kinked, smooth;
  classify_interfaces(m.mesh, kinked, smooth);
  const int n_el_along = static_cast<int>(xb.size() - 1) * n_along, n_el_across = static_cast<int>(yb.size() - 1) * n_across;
  const double eps = param(c, "eps_factor", 1e4) * (sparam(c, "eps_scaling", "elements") == "elements"
                                                        ? static_cast<double>(n_el_along * n_el_across)
                                                        : 1.0);
  const ConstraintMethod cm = method_from_params(c, eps);
  if (!smooth.empty()) {
    EdgeConstraint g;
    g.kind = ConstraintKind::g1;
    g.method = cm;
    g.pairs = smooth;
    m.constraint_defs.push_back(g);
  }
  if (!kinked.empty()) {
    EdgeConstraint f;
    f.kind = ConstraintKind::fold;
    f.method = cm;
    f.pairs = kinked;
    m.constraint_defs.push_back(f);
  }

  // X = 0 edge: first control point row fixed in x and z, corner fixed in y. The horizontal
  // tangent comes from fixing z of the second row ("rows") or from a clamp constraint
  // with the interface method ("clamp"); multipliers continuous along an interface need the latter.
  const int nx = static_cast<int>(xb.size() - 1), ny = static_cast<int>(yb.size() - 1);
  const std::string root = sparam(c, "root", "rows");
  std::vector<int> row0, row1;
  EdgeConstraint clamp;
  clamp.kind = ConstraintKind::clamp;
  clamp.method = cm;
  for (int j = 0; j < ny; ++j) {
    const Patch& p = m.mesh.patches[nx * j];
    for (int k = 0; k < p.nv; ++k) {
      row0.push_back(m.mesh.global_node(nx * j, p.index(0, k)));
      row1.push_back(m.mesh.global_node(nx * j, p.index(1, k)));
    }
    clamp.edges.push_back({nx * j, Side::u0});
  }
  m.dirichlet = {fix_nodes(row0, true, false, true), fix_nodes({m.mesh.global_node(0, 0)}, false, true, false)};
  if (root == "rows")
    m.dirichlet.push_back(fix_nodes(row1, false, false, true));
  else if (root == "clamp")
    m.constraint_defs.push_back(clamp);
  else
    throw ConfigError(c.id + ": unknown root condition '" + root + "'");
  BoundaryMoment bm;
  for (int j = 0; j < ny; ++j) bm.edges.push_back({nx * j + nx - 1, Side::u1});
  bm.m = -sol.M;  // positive moments on u1 of a +z-normal strip bend toward -z
  bm.live = true;
  m.loads.moments = {bm};

  const double H_exact = 0.5 * sol.kappa1();
  const double M = sol.M;
  in.measure = [geo, H_exact, M](const ShellModel& mdl, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q) {
    std::vector<Measurement> out;
    const Eigen::MatrixX3d X = reference_positions(mdl.mesh);
    out.push_back({"l2_error", l2_displacement_error(mdl.cache, X, x, [&](const Eigen::Vector3d& P) {
                     return geo.displacement(P);
                   })});
    out.push_back({"H_max_rel_dev", max_curvature_deviation(mdl, x, H_exact)});
    double dev = 0;
    bool any = false;
    for (const auto& pr : mdl.constraints.report(mdl.mesh, x, q)) {
      if (mdl.constraints.constraints()[pr.constraint].def.kind != ConstraintKind::fold) continue;
      // transmitted moment per current length
      const double m_cur = pr.moment * pr.dS_ref / pr.ds_cur;
      dev = std::max(dev, std::abs(std::abs(m_cur) / M - 1));
      any = true;
    }
    if (any) out.push_back({"moment_rel_dev", dev});
    return out;
  };
  return in;
}

// ---------------------------------------------------------------- cantilever

/// Length along y (u), width along x (v); clamped at u0, loaded at u1.
/// mode "shear": traction F/W in z. mode "stretch": tip held in y, z prescribed.
BenchmarkInstance cantilever(const BenchmarkCase& c, const Level& l, const std::string& model) {
  const double L = param(c, "L"), W = param(c, "W"), T = param(c, "T"), E = param(c, "E");
  const double skew = param(c, "skew", 0.0);
  const std::string mode = sparam(c, "mode", "shear");
  BenchmarkInstance in;
  in.per_step = true;
  ShellModel& m = in.model;
  Patch p = make_plate_patch(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, L, 0), Eigen::Vector3d(W, 0, 0), l.degree, l.n,
                             level_n2(l, 1));
  if (skew > 0) p = make_skew_mesh(p, skew);
  m.mesh.patches.push_back(p);
  m.mesh.finalize();
  m.materials = {shell_material(c, model)};
  EdgeConstraint clamp;
  clamp.kind = ConstraintKind::clamp;
  clamp.method = penalty(param(c, "eps_factor") * E);
  clamp.edges = {{0, Side::u0}};
  m.constraint_defs = {clamp};
  m.dirichlet = {fix_side(m.mesh, 0, Side::u0, true, true, true)};
  const double I = W * T * T * T / 12, F0 = E * I / (L * L);
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ(), ey = Eigen::Vector3d::UnitY();
  if (mode == "shear") {
    const double F = param(c, "F_factor") * F0;
    m.loads.tractions = {{{{0, Side::u1}}, Eigen::Vector3d(0, 0, F / W)}};
    in.measure = probes({{"w_tip", 0, 1.0, 0.5, ez}, {"v_tip", 0, 1.0, 0.5, -ey}});
  } else if (mode == "stretch") {
    DirichletBC tip = fix_side(m.mesh, 0, Side::u1, false, true, true);
    tip.displacement = Eigen::Vector3d(0, 0, param(c, "w_max"));
    tip.proportional = true;
    m.dirichlet.push_back(tip);
    const std::vector<int> nodes = tip.nodes;
    in.measure = [nodes](const ShellModel& mdl, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q) {
      // reactions of the tip support from the residual at zero external load
      const GlobalSystem sys = assemble(mdl, x, q, 0.0, false);
      double Fy = 0, Fz = 0;
      for (int n : nodes) {
        Fy += sys.r[3 * n + 1];
        Fz += sys.r[3 * n + 2];
      }
      return std::vector<Measurement>{{"Fz_tip", Fz}, {"Fy_tip", Fy}};
    };
  } else {
    throw ConfigError(c.id + ": unknown cantilever mode '" + mode + "'");
  }
  return in;
}

using Builder = std::function<BenchmarkInstance(const BenchmarkCase&, const Level&, const std::string&)>;

const std::map<std::string, Builder>& builders() {
  static const std::map<std::string, Builder> b = {
      {"pinched_hemisphere", hemisphere},
      {"navier_plate", navier_plate},
      {"pinched_cylinder_linear",
       [](const BenchmarkCase& c, const Level& l, const std::string& m) { return cylinder(c, l, m, true); }},
      {"cylinder_nonlinear",
       [](const BenchmarkCase& c, const Level& l, const std::string& m) { return cylinder(c, l, m, false); }},
      {"flat_strip_bending",
       [](const BenchmarkCase& c, const Level& l, const std::string& m) { return bending_strip(c, l, m, false); }},
      {"folded_strip_bending",
       [](const BenchmarkCase& c, const Level& l, const std::string& m) { return bending_strip(c, l, m, true); }},
      {"cantilever", cantilever},
  };
  return b;
}

}  // namespace

std::vector<std::string> benchmark_kinds() {
  std::vector<std::string> k;
  for (const auto& [name, b] : builders()) k.push_back(name);
  return k;
}

// ---------------------------------------------------------------- case files

BenchmarkCase case_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("benchmark case: expected an object");
  static const std::set<std::string> allowed = {"id",     "kind",   "description", "params",
                                                "schedule", "models", "solver",      "references", "reference_source"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("benchmark case: unknown key '" + it.key() + "'");
  BenchmarkCase c;
  try {
    c.id = j.at("id").get<std::string>();
    c.kind = j.at("kind").get<std::string>();
    c.description = j.value("description", "");
    c.params = j.value("params", json::object());
    for (const json& lj : j.at("schedule")) {
      for (auto it = lj.begin(); it != lj.end(); ++it)
        if (it.key() != "degree" && it.key() != "n" && it.key() != "n2")
          throw ConfigError(c.id + ": unknown schedule key '" + it.key() + "'");
      c.schedule.push_back({lj.at("degree").get<int>(), lj.at("n").get<int>(), lj.value("n2", 0)});
    }
    if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
    c.references = j.value("references", std::map<std::string, double>{});
    c.reference_source = j.value("reference_source", c.references.empty() ? "none" : "literature");
  } catch (const json::exception& e) {
    throw ConfigError("benchmark case: " + std::string(e.what()));
  }
  c.solver = solver_from_json(j.value("solver", json::object()));
  if (!builders().count(c.kind)) throw ConfigError(c.id + ": unknown kind '" + c.kind + "'");
  if (!c.params.is_object()) throw ConfigError(c.id + ": params must be an object");
  if (c.schedule.empty()) throw ConfigError(c.id + ": empty schedule");
  for (const Level& l : c.schedule)
    if (l.degree < 2 || l.n < 1 || l.n2 < 0) throw ConfigError(c.id + ": invalid level");
  if (c.models.empty()) throw ConfigError(c.id + ": no models");
  static const std::set<std::string> sources = {"literature", "analytic", "fixture", "none"};
  if (!sources.count(c.reference_source)) throw ConfigError(c.id + ": unknown reference source");
  // building the coarsest level validates the parameters and probes
  for (const std::string& model : c.models) build_instance(c, c.schedule.front(), model);
  return c;
}

json to_json(const BenchmarkCase& c) {
  json sched = json::array();
  for (const Level& l : c.schedule) {
    json lj = {{"degree", l.degree}, {"n", l.n}};
    if (l.n2 > 0) lj["n2"] = l.n2;
    sched.push_back(lj);
  }
  return {{"id", c.id},
          {"kind", c.kind},
          {"description", c.description},
          {"params", c.params},
          {"schedule", sched},
          {"models", c.models},
          {"solver", to_json(c.solver)},
          {"references", c.references},
          {"reference_source", c.reference_source}};
}

std::vector<BenchmarkCase> load_cases(const std::string& dir) {
  std::vector<BenchmarkCase> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec))
    if (entry.path().extension() == ".json") out.push_back(case_from_json(read_json_file(entry.path().string())));
  if (ec) throw ConfigError("cannot list '" + dir + "': " + ec.message());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

BenchmarkInstance build_instance(const BenchmarkCase& c, const Level& level, const std::string& model) {
  const auto it = builders().find(c.kind);
  if (it == builders().end()) throw ConfigError(c.id + ": unknown kind '" + c.kind + "'");
  BenchmarkInstance in;
  try {
    in = it->second(c, level, model);
    in.model.prepare();
  } catch (const GeometryError& e) {
    throw ConfigError(c.id + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(c.id + ": " + e.what());
  }
  in.solver = c.solver;
  for (const auto& [q, v] : c.references) in.references[q] = v;
  return in;
}

// ---------------------------------------------------------------- running

std::vector<ResultRow> run_case(const BenchmarkCase& c, const RunOptions& opt) {
  std::vector<ResultRow> rows;
  const auto& schedule = opt.schedule.empty() ? c.schedule : opt.schedule;
  const auto& models = opt.models.empty() ? c.models : opt.models;
  for (const std::string& model : models)
    for (const Level& level : schedule) {
      ResultRow base;
      base.case_id = c.id;
      base.model = model;
      base.level = level;
      base.value = base.reference = base.rel_error = NaN;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        BenchmarkInstance in = build_instance(c, level, model);
        SolverConfig cfg = in.solver;
        cfg.threads = opt.threads;
        const SolveResult r = newton_solve(in.model, cfg);
        base.wall_seconds = r.wall_seconds;
        auto emit = [&](double lambda, int iters, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q) {
          for (const Measurement& ms : in.measure(in.model, x, q)) {
            ResultRow row = base;
            row.load_factor = lambda;
            row.iterations = iters;
            row.quantity = ms.quantity;
            row.value = ms.value;
            const auto ref = in.references.find(ms.quantity);
            if (ref != in.references.end() && std::abs(lambda - 1.0) < 1e-12) {
              row.reference = ref->second;
              row.rel_error = std::abs(ms.value - ref->second) / std::abs(ref->second);
            }
            rows.push_back(row);
          }
        };
        if (in.per_step) {
          for (const StepRecord& s : r.steps)
            if (s.converged) emit(s.lambda, s.iterations, s.x, s.q);
        } else if (r.converged) {
          int iters = 0;
          for (const StepRecord& s : r.steps) iters += s.iterations;
          emit(1.0, iters, r.x, r.q);
        }
        if (!r.converged) {
          ResultRow row = base;
          row.quantity = "solve";
          row.load_factor = r.steps.empty() ? 0.0 : r.steps.back().lambda;
          row.status = "failed: " + r.message;
          rows.push_back(row);
        }
      } catch (const std::exception& e) {
        ResultRow row = base;
        row.quantity = "solve";
        row.status = std::string("error: ") + e.what();
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(row);
      }
    }
  return rows;
}

void write_rows(std::ostream& os, const std::vector<ResultRow>& rows) {
  CsvWriter w(os, {"case", "model", "degree", "n", "n2", "load_factor", "quantity", "value", "reference", "rel_error",
                   "iterations", "wall_seconds", "status"});
  for (const ResultRow& r : rows) {
    w.cell(r.case_id).cell(r.model).cell(r.level.degree).cell(r.level.n).cell(r.level.n2).cell(r.load_factor);
    w.cell(r.quantity).cell(r.value).cell(r.reference).cell(r.rel_error).cell(r.iterations).cell(r.wall_seconds);
    w.cell(r.status).end_row();
  }
}

std::vector<ModelGap> cross_model_check(const BenchmarkCase& c, const std::string& model_a, const std::string& model_b,
                                        const RunOptions& opt) {
  RunOptions oa = opt, ob = opt;
  oa.models = {model_a};
  ob.models = {model_b};
  const auto ra = run_case(c, oa), rb = run_case(c, ob);
  for (const auto* rows : {&ra, &rb})
    for (const ResultRow& r : *rows)
      if (r.status != "ok") throw std::runtime_error(c.id + " (" + r.model + "): " + r.status);
  std::vector<ModelGap> gaps;
  for (const ResultRow& a : ra)
    for (const ResultRow& b : rb)
      if (a.level.degree == b.level.degree && a.level.n == b.level.n && a.level.n2 == b.level.n2 &&
          a.quantity == b.quantity && std::abs(a.load_factor - b.load_factor) < 1e-12) {
        ModelGap g;
        g.level = a.level;
        g.load_factor = a.load_factor;
        g.quantity = a.quantity;
        g.gap = std::abs(a.value - b.value) / std::max(std::abs(b.value), 1e-300);
        g.wall_a = a.wall_seconds;
        g.wall_b = b.wall_seconds;
        gaps.push_back(g);
      }
  return gaps;
}

// ---------------------------------------------------------------- geometry helpers

MultiPatchMesh make_strip_mesh(const PureBendingStrip& geo, const std::vector<double>& xb,
                               const std::vector<double>& yb, int degree, int n_along, int n_across, double skew) {
  if (xb.size() < 2 || yb.size() < 2) throw GeometryError("strip mesh needs at least one patch");
  MultiPatchMesh m;
  const int nx = static_cast<int>(xb.size() - 1), ny = static_cast<int>(yb.size() - 1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Eigen::Vector3d o = geo.reference(xb[i], yb[j]);
      Patch p = make_plate_patch(o, geo.reference(xb[i + 1], yb[j]) - o, geo.reference(xb[i], yb[j + 1]) - o, degree,
                                 n_along, n_across);
      if (skew > 0) p = make_skew_mesh(p, skew);
      p.id = "strip_" + std::to_string(i) + "_" + std::to_string(j);
      m.patches.push_back(p);
    }
  m.finalize();
  return m;
}

void classify_interfaces(const MultiPatchMesh& mesh, std::vector<InterfacePair>& kinked,
                         std::vector<InterfacePair>& smooth) {
  auto normal = [&](int patch) {
    const Patch& p = mesh.patches[patch];
    return (p.position(p.nu - 1) - p.position(0)).cross(p.position(p.index(0, p.nv - 1)) - p.position(0)).normalized();
  };
  kinked.clear();
  smooth.clear();
  for (const InterfacePair& ip : mesh.interfaces)
    (normal(ip.a.patch).cross(normal(ip.b.patch)).norm() > 1e-8 ? kinked : smooth).push_back(ip);
}

double l2_field_difference(const std::vector<ElementCache>& cache, const Eigen::MatrixX3d& xa,
                           const Eigen::MatrixX3d& xb) {
  double num = 0, area = 0;
  for (const ElementCache& el : cache) {
    const NodalPositions d = gather(el.nodes, xa) - gather(el.nodes, xb);
    for (const QuadPoint& qp : el.qp) {
      num += (d.transpose() * qp.basis.N).squaredNorm() * qp.dA;
      area += qp.dA;
    }
  }
  return std::sqrt(num / area);
}

double max_curvature_deviation(const ShellModel& model, const Eigen::MatrixX3d& x, double H_exact) {
  double dev = 0;
  for (const ElementCache& el : model.cache) {
    const NodalPositions xe = gather(el.nodes, x);
    for (const QuadPoint& qp : el.qp)
      dev = std::max(dev, std::abs(compute_state(qp.basis, xe, el.scale).H / H_exact - 1));
  }
  return dev;
}

}  // namespace kls
