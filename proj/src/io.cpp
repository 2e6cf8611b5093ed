#include "klshell/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace kls {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const json& j, const char* key, const T& def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

template <class T>
T need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return get<T>(j, key, T{});
}

Eigen::Vector3d vec3(const json& j, const char* key, const Eigen::Vector3d& def) {
  if (!j.contains(key)) return def;
  const auto v = get<std::vector<double>>(j, key, {});
  if (v.size() != 3) throw ConfigError(std::string("key '") + key + "': expected 3 numbers");
  return {v[0], v[1], v[2]};
}

json arr(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string resolve(const std::string& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).string();
}

std::vector<EdgeRef> edges_from(const json& j) {
  std::vector<EdgeRef> out;
  if (!j.is_array()) throw ConfigError("edges: expected an array");
  for (const json& e : j) out.push_back(edge_from_json(e));
  return out;
}

json edges_to(const std::vector<EdgeRef>& e) {
  json a = json::array();
  for (const EdgeRef& r : e) a.push_back(to_json(r));
  return a;
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------- material

MaterialLaw material_from_json(const json& j) {
  const std::string law = need<std::string>(j, "law", "material");
  auto surface_lame = [&](double& L, double& mu) {
    if (j.contains("E")) {
      const double T = need<double>(j, "T", "material");
      try {
        std::tie(L, mu) = lame_2d_from_3d(need<double>(j, "E", "material"), need<double>(j, "nu", "material"), T);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("material: ") + e.what());
      }
    } else {
      L = need<double>(j, "Lambda", "material");
      mu = need<double>(j, "mu", "material");
    }
  };
  if (law == "koiter" || law == "mixed") {
    check_keys(j, {"law", "E", "nu", "T", "Lambda", "mu"}, "material");
    double L, mu;
    surface_lame(L, mu);
    const double T = need<double>(j, "T", "material");
    if (!(T > 0)) throw ConfigError("material: T must be positive");
    if (law == "koiter") return Koiter{L, mu, T};
    return MixedKoiterNH{L, mu, T};
  }
  if (law == "canham_nh") {
    check_keys(j, {"law", "Lambda", "mu", "c"}, "material");
    return CanhamNH{need<double>(j, "Lambda", "material"), need<double>(j, "mu", "material"),
                    need<double>(j, "c", "material")};
  }
  if (law == "projected_nh" || law == "projected_nh_incompressible") {
    check_keys(j, {"law", "E", "nu", "T", "Lambda3", "mu3", "n_gauss", "reduction"}, "material");
    Projected p;
    p.law = law == "projected_nh" ? Law3D::CompressibleNH : Law3D::IncompressibleNH;
    if (j.contains("E")) {
      try {
        std::tie(p.Lambda3, p.mu3) = lame_3d(need<double>(j, "E", "material"), need<double>(j, "nu", "material"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("material: ") + e.what());
      }
    } else {
      p.Lambda3 = get<double>(j, "Lambda3", 0.0);
      p.mu3 = need<double>(j, "mu3", "material");
    }
    p.T = need<double>(j, "T", "material");
    p.n_gauss = get<int>(j, "n_gauss", 3);
    const std::string red = get<std::string>(j, "reduction", "metric_weighted");
    if (red == "metric_weighted")
      p.reduction = Reduction::metric_weighted;
    else if (red == "direct")
      p.reduction = Reduction::direct;
    else
      throw ConfigError("material: unknown reduction '" + red + "'");
    if (!(p.T > 0) || p.n_gauss < 1) throw ConfigError("material: invalid thickness integration");
    return p;
  }
  throw ConfigError("material: unknown law '" + law + "'");
}

json to_json(const MaterialLaw& law) {
  return std::visit(
      [](const auto& m) -> json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Koiter>)
          return {{"law", "koiter"}, {"Lambda", m.Lambda}, {"mu", m.mu}, {"T", m.T}};
        else if constexpr (std::is_same_v<M, MixedKoiterNH>)
          return {{"law", "mixed"}, {"Lambda", m.Lambda}, {"mu", m.mu}, {"T", m.T}};
        else if constexpr (std::is_same_v<M, CanhamNH>)
          return {{"law", "canham_nh"}, {"Lambda", m.Lambda}, {"mu", m.mu}, {"c", m.c}};
        else
          return {{"law", m.law == Law3D::CompressibleNH ? "projected_nh" : "projected_nh_incompressible"},
                  {"Lambda3", m.Lambda3},
                  {"mu3", m.mu3},
                  {"T", m.T},
                  {"n_gauss", m.n_gauss},
                  {"reduction", m.reduction == Reduction::metric_weighted ? "metric_weighted" : "direct"}};
      },
      law);
}

// ---------------------------------------------------------------- mesh

EdgeRef edge_from_json(const json& j) {
  check_keys(j, {"patch", "side"}, "edge");
  try {
    return {need<int>(j, "patch", "edge"), side_from_string(need<std::string>(j, "side", "edge"))};
  } catch (const GeometryError& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const EdgeRef& e) { return {{"patch", e.patch}, {"side", to_string(e.side)}}; }

json mesh_to_json(const MultiPatchMesh& mesh) {
  json patches = json::array();
  for (const Patch& p : mesh.patches) {
    json cps = json::array();
    for (const auto& c : p.cp) cps.push_back({c[0], c[1], c[2], c[3]});
    patches.push_back({{"id", p.id},
                       {"degree", {p.ku.degree, p.kv.degree}},
                       {"knots_u", p.ku.knots},
                       {"knots_v", p.kv.knots},
                       {"n", {p.nu, p.nv}},
                       {"control_points", cps}});
  }
  json ifs = json::array();
  for (const auto& i : mesh.interfaces) ifs.push_back({{"a", to_json(i.a)}, {"b", to_json(i.b)}, {"reversed", i.reversed}});
  json sets = json::object();
  for (const auto& [name, s] : mesh.sets) {
    json pts = json::array();
    for (const auto& [p, c] : s.points) pts.push_back({p, c});
    sets[name] = {{"sides", edges_to(s.sides)}, {"points", pts}};
  }
  return {{"patches", patches}, {"interfaces", ifs}, {"sets", sets}};
}

MultiPatchMesh mesh_from_json(const json& j) {
  check_keys(j, {"patches", "interfaces", "sets"}, "mesh");
  MultiPatchMesh m;
  for (const json& pj : need<json>(j, "patches", "mesh")) {
    check_keys(pj, {"id", "degree", "knots_u", "knots_v", "n", "control_points"}, "patch");
    Patch p;
    p.id = get<std::string>(pj, "id", "");
    const auto deg = need<std::vector<int>>(pj, "degree", "patch");
    const auto n = need<std::vector<int>>(pj, "n", "patch");
    if (deg.size() != 2 || n.size() != 2) throw ConfigError("patch: degree and n need two entries");
    p.ku.degree = deg[0];
    p.kv.degree = deg[1];
    p.ku.knots = need<std::vector<double>>(pj, "knots_u", "patch");
    p.kv.knots = need<std::vector<double>>(pj, "knots_v", "patch");
    p.nu = n[0];
    p.nv = n[1];
    for (const auto& c : need<std::vector<std::vector<double>>>(pj, "control_points", "patch")) {
      if (c.size() != 4 && c.size() != 3) throw ConfigError("patch: control points need 3 or 4 entries");
      p.cp.emplace_back(c[0], c[1], c[2], c.size() == 4 ? c[3] : 1.0);
    }
    m.patches.push_back(std::move(p));
  }
  if (j.contains("interfaces"))
    for (const json& ij : j.at("interfaces")) {
      check_keys(ij, {"a", "b", "reversed"}, "interface");
      m.interfaces.push_back({edge_from_json(need<json>(ij, "a", "interface")), edge_from_json(need<json>(ij, "b", "interface")),
                              get<bool>(ij, "reversed", false)});
    }
  if (j.contains("sets"))
    for (auto it = j.at("sets").begin(); it != j.at("sets").end(); ++it) {
      check_keys(it.value(), {"sides", "points"}, "set");
      NamedSet s;
      if (it.value().contains("sides")) s.sides = edges_from(it.value().at("sides"));
      for (const auto& pc : get<std::vector<std::vector<int>>>(it.value(), "points", {})) {
        if (pc.size() != 2) throw ConfigError("set points are (patch, control point) pairs");
        s.points.emplace_back(pc[0], pc[1]);
      }
      m.sets[it.key()] = s;
    }
  try {
    m.finalize();
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("mesh: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------- constraints, loads, solver

EdgeConstraint constraint_from_json(const json& j) {
  check_keys(j, {"kind", "method", "epsilon", "interp", "pairs", "edges", "plane_normal", "alpha0"}, "constraint");
  EdgeConstraint c;
  try {
    c.kind = constraint_kind_from_string(need<std::string>(j, "kind", "constraint"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string method = get<std::string>(j, "method", "penalty");
  if (method == "lagrange")
    c.method.lagrange = true;
  else if (method != "penalty")
    throw ConfigError("constraint: unknown method '" + method + "'");
  c.method.epsilon = get<double>(j, "epsilon", 0.0);
  if (!c.method.lagrange && !(c.method.epsilon > 0)) throw ConfigError("constraint: penalty needs epsilon > 0");
  const std::string interp = get<std::string>(j, "interp", "N2Q0");
  if (interp == "N2Q0")
    c.method.interp = LMInterp::N2Q0;
  else if (interp == "N2Q1c")
    c.method.interp = LMInterp::N2Q1c;
  else
    throw ConfigError("constraint: unknown interpolation '" + interp + "'");
  if (j.contains("pairs"))
    for (const json& pj : j.at("pairs")) {
      check_keys(pj, {"a", "b", "reversed"}, "pair");
      c.pairs.push_back({edge_from_json(need<json>(pj, "a", "pair")), edge_from_json(need<json>(pj, "b", "pair")),
                         get<bool>(pj, "reversed", false)});
    }
  if (j.contains("edges")) c.edges = edges_from(j.at("edges"));
  c.plane_normal = vec3(j, "plane_normal", Eigen::Vector3d::UnitZ());
  if (j.contains("alpha0")) c.alpha0 = get<double>(j, "alpha0", 0.0);
  return c;
}

json to_json(const EdgeConstraint& c) {
  json j = {{"kind", to_string(c.kind)},
            {"method", c.method.lagrange ? "lagrange" : "penalty"},
            {"epsilon", c.method.epsilon},
            {"interp", c.method.interp == LMInterp::N2Q0 ? "N2Q0" : "N2Q1c"},
            {"edges", edges_to(c.edges)},
            {"plane_normal", arr(c.plane_normal)}};
  json pairs = json::array();
  for (const auto& p : c.pairs) pairs.push_back({{"a", to_json(p.a)}, {"b", to_json(p.b)}, {"reversed", p.reversed}});
  j["pairs"] = pairs;
  if (c.alpha0) j["alpha0"] = *c.alpha0;
  return j;
}

LoadCase loads_from_json(const json& j) {
  check_keys(j, {"pressure", "surface_force", "traction", "moment", "point"}, "loads");
  LoadCase l;
  for (const json& p : get<json>(j, "pressure", json::array())) {
    check_keys(p, {"p", "follower", "profile", "Lx", "Ly", "origin", "patches"}, "pressure");
    PressureLoad q;
    q.p = need<double>(p, "p", "pressure");
    q.follower = get<bool>(p, "follower", true);
    const std::string prof = get<std::string>(p, "profile", "uniform");
    if (prof == "sinusoidal")
      q.profile = PressureProfile::sinusoidal;
    else if (prof != "uniform")
      throw ConfigError("pressure: unknown profile '" + prof + "'");
    q.Lx = get<double>(p, "Lx", 1.0);
    q.Ly = get<double>(p, "Ly", 1.0);
    q.origin = vec3(p, "origin", Eigen::Vector3d::Zero());
    q.patches = get<std::vector<int>>(p, "patches", {});
    l.pressures.push_back(q);
  }
  for (const json& p : get<json>(j, "surface_force", json::array())) {
    check_keys(p, {"f", "patches"}, "surface_force");
    l.surface_forces.push_back({vec3(p, "f", Eigen::Vector3d::Zero()), get<std::vector<int>>(p, "patches", {})});
  }
  for (const json& p : get<json>(j, "traction", json::array())) {
    check_keys(p, {"edges", "t"}, "traction");
    l.tractions.push_back({edges_from(need<json>(p, "edges", "traction")), vec3(p, "t", Eigen::Vector3d::Zero())});
  }
  for (const json& p : get<json>(j, "moment", json::array())) {
    check_keys(p, {"edges", "m", "live"}, "moment");
    l.moments.push_back({edges_from(need<json>(p, "edges", "moment")), need<double>(p, "m", "moment"), get<bool>(p, "live", true)});
  }
  for (const json& p : get<json>(j, "point", json::array())) {
    check_keys(p, {"patch", "u", "v", "F"}, "point");
    l.points.push_back({need<int>(p, "patch", "point"), need<double>(p, "u", "point"), need<double>(p, "v", "point"),
                        vec3(p, "F", Eigen::Vector3d::Zero())});
  }
  return l;
}

json to_json(const LoadCase& l) {
  json j = json::object();
  json a = json::array();
  for (const auto& p : l.pressures)
    a.push_back({{"p", p.p},
                 {"follower", p.follower},
                 {"profile", p.profile == PressureProfile::uniform ? "uniform" : "sinusoidal"},
                 {"Lx", p.Lx},
                 {"Ly", p.Ly},
                 {"origin", arr(p.origin)},
                 {"patches", p.patches}});
  j["pressure"] = a;
  a = json::array();
  for (const auto& f : l.surface_forces) a.push_back({{"f", arr(f.f0)}, {"patches", f.patches}});
  j["surface_force"] = a;
  a = json::array();
  for (const auto& t : l.tractions) a.push_back({{"edges", edges_to(t.edges)}, {"t", arr(t.t)}});
  j["traction"] = a;
  a = json::array();
  for (const auto& m : l.moments) a.push_back({{"edges", edges_to(m.edges)}, {"m", m.m}, {"live", m.live}});
  j["moment"] = a;
  a = json::array();
  for (const auto& p : l.points) a.push_back({{"patch", p.patch}, {"u", p.u}, {"v", p.v}, {"F", arr(p.F)}});
  j["point"] = a;
  return j;
}

SolverConfig solver_from_json(const json& j) {
  check_keys(j,
             {"n_load_steps", "max_newton_iter", "tol_rel_residual", "tol_abs_residual", "tol_increment", "max_cuts",
              "extrapolate", "linear", "threads"},
             "solver");
  SolverConfig s;
  s.n_load_steps = get<int>(j, "n_load_steps", s.n_load_steps);
  s.max_newton_iter = get<int>(j, "max_newton_iter", s.max_newton_iter);
  s.tol_rel_residual = get<double>(j, "tol_rel_residual", s.tol_rel_residual);
  s.tol_abs_residual = get<double>(j, "tol_abs_residual", s.tol_abs_residual);
  s.tol_increment = get<double>(j, "tol_increment", s.tol_increment);
  s.max_cuts = get<int>(j, "max_cuts", s.max_cuts);
  s.extrapolate = get<bool>(j, "extrapolate", s.extrapolate);
  s.linear = get<bool>(j, "linear", s.linear);
  s.threads = get<int>(j, "threads", s.threads);
  if (!(s.tol_rel_residual > 0) || !(s.tol_abs_residual > 0) || !(s.tol_increment > 0))
    throw ConfigError("solver: tolerances must be positive");
  if (s.n_load_steps < 1 || s.max_newton_iter < 1 || s.max_cuts < 0 || s.threads < 1)
    throw ConfigError("solver: invalid step or iteration counts");
  return s;
}

json to_json(const SolverConfig& s) {
  return {{"n_load_steps", s.n_load_steps},     {"max_newton_iter", s.max_newton_iter},
          {"tol_rel_residual", s.tol_rel_residual}, {"tol_abs_residual", s.tol_abs_residual},
          {"tol_increment", s.tol_increment},   {"max_cuts", s.max_cuts},
          {"extrapolate", s.extrapolate},       {"linear", s.linear},
          {"threads", s.threads}};
}

// ---------------------------------------------------------------- run config

namespace {

PrimitiveSpec primitive_from_json(const json& j) {
  check_keys(j, {"kind", "degree", "n_u", "n_v", "Lx", "Ly", "R", "L", "phi0", "phi1", "polar_min", "polar_max"},
             "primitive");
  PrimitiveSpec s;
  s.kind = need<std::string>(j, "kind", "primitive");
  s.degree = get<int>(j, "degree", s.degree);
  s.n_u = get<int>(j, "n_u", s.n_u);
  s.n_v = get<int>(j, "n_v", s.n_v);
  s.Lx = get<double>(j, "Lx", s.Lx);
  s.Ly = get<double>(j, "Ly", s.Ly);
  s.R = get<double>(j, "R", s.R);
  s.L = get<double>(j, "L", s.L);
  s.phi0 = get<double>(j, "phi0", s.phi0);
  s.phi1 = get<double>(j, "phi1", s.phi1);
  s.polar_min = get<double>(j, "polar_min", s.polar_min);
  s.polar_max = get<double>(j, "polar_max", s.polar_max);
  return s;
}

json to_json(const PrimitiveSpec& s) {
  return {{"kind", s.kind}, {"degree", s.degree}, {"n_u", s.n_u},   {"n_v", s.n_v},
          {"Lx", s.Lx},     {"Ly", s.Ly},         {"R", s.R},       {"L", s.L},
          {"phi0", s.phi0}, {"phi1", s.phi1},     {"polar_min", s.polar_min}, {"polar_max", s.polar_max}};
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  check_keys(j, {"mesh", "material", "constraints", "dirichlet", "loads", "solver", "outputs"}, "config");
  RunConfig c;
  const json mj = need<json>(j, "mesh", "config");
  check_keys(mj, {"primitive", "file", "inline", "elements", "skew"}, "mesh");
  const int sources = mj.contains("primitive") + mj.contains("file") + mj.contains("inline");
  if (sources != 1) throw ConfigError("mesh: give exactly one of 'primitive', 'file', 'inline'");
  if (mj.contains("primitive")) c.mesh.primitive = primitive_from_json(mj.at("primitive"));
  c.mesh.file = get<std::string>(mj, "file", "");
  if (mj.contains("inline")) c.mesh.inline_mesh = mj.at("inline");
  const auto el = get<std::vector<int>>(mj, "elements", {1, 1});
  if (el.size() != 2 || el[0] < 1 || el[1] < 1) throw ConfigError("mesh: 'elements' needs two positive counts");
  c.mesh.refine_u = el[0];
  c.mesh.refine_v = el[1];
  c.mesh.skew = get<double>(mj, "skew", 0.0);

  c.material = material_from_json(need<json>(j, "material", "config"));
  for (const json& cj : get<json>(j, "constraints", json::array())) c.constraints.push_back(constraint_from_json(cj));
  for (const json& dj : get<json>(j, "dirichlet", json::array())) {
    check_keys(dj, {"sets", "edges", "points", "fix", "value", "proportional"}, "dirichlet");
    DirichletSpec d;
    d.sets = get<std::vector<std::string>>(dj, "sets", {});
    if (dj.contains("edges")) d.edges = edges_from(dj.at("edges"));
    for (const auto& pc : get<std::vector<std::vector<int>>>(dj, "points", {})) {
      if (pc.size() != 2) throw ConfigError("dirichlet: points are (patch, control point) pairs");
      d.points.emplace_back(pc[0], pc[1]);
    }
    const auto fix = get<std::vector<bool>>(dj, "fix", {true, true, true});
    if (fix.size() != 3) throw ConfigError("dirichlet: 'fix' needs three flags");
    d.fix = {fix[0], fix[1], fix[2]};
    d.value = vec3(dj, "value", Eigen::Vector3d::Zero());
    d.proportional = get<bool>(dj, "proportional", false);
    c.dirichlet.push_back(d);
  }
  c.loads = loads_from_json(get<json>(j, "loads", json::object()));
  c.solver = solver_from_json(get<json>(j, "solver", json::object()));
  const json oj = get<json>(j, "outputs", json::object());
  check_keys(oj, {"probes", "vtk", "vtk_resolution", "csv"}, "outputs");
  for (const json& pj : get<json>(oj, "probes", json::array())) {
    check_keys(pj, {"name", "patch", "u", "v"}, "probe");
    c.outputs.probes.push_back({need<std::string>(pj, "name", "probe"), need<int>(pj, "patch", "probe"),
                                need<double>(pj, "u", "probe"), need<double>(pj, "v", "probe")});
  }
  c.outputs.vtk = get<std::string>(oj, "vtk", "");
  c.outputs.vtk_resolution = get<int>(oj, "vtk_resolution", 3);
  if (c.outputs.vtk_resolution < 2) throw ConfigError("outputs: vtk_resolution must be at least 2");
  c.outputs.csv = get<std::string>(oj, "csv", "probes.csv");
  (void)base_dir;
  return c;
}

json to_json(const RunConfig& c) {
  json mesh = {{"elements", {c.mesh.refine_u, c.mesh.refine_v}}, {"skew", c.mesh.skew}};
  if (c.mesh.primitive) mesh["primitive"] = to_json(*c.mesh.primitive);
  if (!c.mesh.file.empty()) mesh["file"] = c.mesh.file;
  if (c.mesh.inline_mesh) mesh["inline"] = *c.mesh.inline_mesh;
  json cons = json::array();
  for (const auto& k : c.constraints) cons.push_back(to_json(k));
  json dir = json::array();
  for (const auto& d : c.dirichlet) {
    json pts = json::array();
    for (const auto& [p, q] : d.points) pts.push_back({p, q});
    dir.push_back({{"sets", d.sets},
                   {"edges", edges_to(d.edges)},
                   {"points", pts},
                   {"fix", {d.fix[0], d.fix[1], d.fix[2]}},
                   {"value", arr(d.value)},
                   {"proportional", d.proportional}});
  }
  json probes = json::array();
  for (const auto& p : c.outputs.probes) probes.push_back({{"name", p.name}, {"patch", p.patch}, {"u", p.u}, {"v", p.v}});
  return {{"mesh", mesh},
          {"material", to_json(c.material)},
          {"constraints", cons},
          {"dirichlet", dir},
          {"loads", to_json(c.loads)},
          {"solver", to_json(c.solver)},
          {"outputs", {{"probes", probes}, {"vtk", c.outputs.vtk}, {"vtk_resolution", c.outputs.vtk_resolution}, {"csv", c.outputs.csv}}}};
}

MultiPatchMesh build_mesh(const MeshSource& src, const std::string& base_dir) {
  try {
    MultiPatchMesh m;
    if (src.primitive) {
      m = make_primitive(*src.primitive);
    } else if (src.inline_mesh) {
      m = mesh_from_json(*src.inline_mesh);
    } else {
      m = mesh_from_json(read_json_file(resolve(base_dir, src.file)));
    }
    if (src.refine_u > 1 || src.refine_v > 1 || src.skew != 0.0) {
      for (Patch& p : m.patches) {
        p = refine(p, std::max(src.refine_u, p.ku.n_spans()), std::max(src.refine_v, p.kv.n_spans()));
        if (src.skew != 0.0) p = make_skew_mesh(p, src.skew);
      }
      m.finalize();
    }
    return m;
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("mesh: ") + e.what());
  }
}

ShellModel build_model(const RunConfig& c, const std::string& base_dir) {
  ShellModel m;
  m.mesh = build_mesh(c.mesh, base_dir);
  const int np = static_cast<int>(m.mesh.patches.size());
  auto check_edge = [&](const EdgeRef& e) {
    if (e.patch < 0 || e.patch >= np) throw ConfigError("edge refers to missing patch " + std::to_string(e.patch));
  };
  m.materials = {c.material};
  m.constraint_defs = c.constraints;
  for (const auto& k : c.constraints) {
    for (const auto& e : k.edges) check_edge(e);
    for (const auto& p : k.pairs) {
      check_edge(p.a);
      check_edge(p.b);
    }
  }
  for (const DirichletSpec& d : c.dirichlet) {
    DirichletBC bc;
    for (const std::string& s : d.sets) {
      if (!m.mesh.sets.count(s)) throw ConfigError("dirichlet: unknown set '" + s + "'");
      const auto n = m.mesh.set_nodes(s);
      bc.nodes.insert(bc.nodes.end(), n.begin(), n.end());
    }
    for (const EdgeRef& e : d.edges) {
      check_edge(e);
      const auto n = m.mesh.side_nodes(e);
      bc.nodes.insert(bc.nodes.end(), n.begin(), n.end());
    }
    for (const auto& [p, q] : d.points) {
      if (p < 0 || p >= np || q < 0 || q >= static_cast<int>(m.mesh.patches[p].cp.size()))
        throw ConfigError("dirichlet: point out of range");
      bc.nodes.push_back(m.mesh.global_node(p, q));
    }
    std::sort(bc.nodes.begin(), bc.nodes.end());
    bc.nodes.erase(std::unique(bc.nodes.begin(), bc.nodes.end()), bc.nodes.end());
    bc.fix = d.fix;
    bc.displacement = d.value;
    bc.proportional = d.proportional;
    m.dirichlet.push_back(bc);
  }
  m.loads = c.loads;
  for (const auto& t : m.loads.tractions)
    for (const auto& e : t.edges) check_edge(e);
  for (const auto& t : m.loads.moments)
    for (const auto& e : t.edges) check_edge(e);
  for (const auto& p : m.loads.points)
    if (p.patch < 0 || p.patch >= np) throw ConfigError("point load on missing patch");
  for (const auto& p : c.outputs.probes)
    if (p.patch < 0 || p.patch >= np) throw ConfigError("probe '" + p.name + "' on missing patch");
  try {
    m.prepare();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

Eigen::Vector3d probe_displacement(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x, int patch, double u,
                                   double v) {
  const int e = mesh.element_at(patch, u, v);
  const auto& el = mesh.elements()[e];
  const BasisEval b = mesh.basis(patch).eval(el.local, u, v);
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
  for (size_t A = 0; A < el.nodes.size(); ++A)
    d += b.N[A] * (x.row(el.nodes[A]).transpose() - mesh.reference_positions()[el.nodes[A]]);
  return d;
}

// ---------------------------------------------------------------- CSV

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), n_cols_(header.size()) {
  for (const auto& h : header) cell(h);
  end_row();
}

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (col_ > 0) os_ << ',';
  os_ << csv_escape(s);
  ++col_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) {
  std::ostringstream ss;
  ss << std::setprecision(12) << v;
  return cell(ss.str());
}

CsvWriter& CsvWriter::cell(int v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (col_ != n_cols_) throw std::logic_error("CSV row has " + std::to_string(col_) + " cells, expected " + std::to_string(n_cols_));
  os_ << "\r\n";
  col_ = 0;
}

// ---------------------------------------------------------------- VTK

FieldOutput sample_fields(const ShellModel& model, const Eigen::MatrixX3d& x, int resolution) {
  if (resolution < 2) throw std::invalid_argument("sample grid needs at least 2 x 2 points per element");
  FieldOutput f;
  const auto& mesh = model.mesh;
  for (const MeshElement& el : mesh.elements()) {
    const PatchElement& pe = mesh.basis(el.patch).elements()[el.local];
    const NodalPositions Xe = gather(el.nodes, reference_positions(mesh)), xe = gather(el.nodes, x);
    const int base = static_cast<int>(f.points.size());
    const double scale = (Xe.colwise().maxCoeff() - Xe.colwise().minCoeff()).norm();
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const double u = pe.u0 + (pe.u1 - pe.u0) * i / (resolution - 1);
        const double v = pe.v0 + (pe.v1 - pe.v0) * j / (resolution - 1);
        const BasisEval b = mesh.basis(el.patch).eval(el.local, u, v);
        const Eigen::Vector3d P = Xe.transpose() * b.N, p = xe.transpose() * b.N;
        f.points.push_back(p);
        f.displacement.push_back(p - P);
        double H = 0, K = 0;
        Eigen::Vector3d tau = Eigen::Vector3d::Zero(), M0 = Eigen::Vector3d::Zero();
        try {
          const SurfaceState cur = compute_state(b, xe, scale);
          const SurfaceState ref = compute_state(b, Xe, scale);
          H = cur.H;
          K = cur.kappa;
          const MaterialResponse r = evaluate(model.material(el.patch), ReferenceState{ref}, cur, false);
          tau << r.stress.tau(0, 0), r.stress.tau(1, 1), r.stress.tau(0, 1);
          M0 << r.stress.M0(0, 0), r.stress.M0(1, 1), r.stress.M0(0, 1);
        } catch (const std::runtime_error&) {
          H = K = std::numeric_limits<double>::quiet_NaN();
        }
        f.mean_curvature.push_back(H);
        f.gauss_curvature.push_back(K);
        f.tau.push_back(tau);
        f.M0.push_back(M0);
      }
    for (int j = 0; j + 1 < resolution; ++j)
      for (int i = 0; i + 1 < resolution; ++i) {
        const int a = base + j * resolution + i;
        f.quads.push_back({a, a + 1, a + resolution + 1, a + resolution});
      }
  }
  return f;
}

void write_vtk(const FieldOutput& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << std::setprecision(12);
  os << "# vtk DataFile Version 3.0\nshell fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << f.points.size() << " double\n";
  for (const auto& p : f.points) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  os << "CELLS " << f.quads.size() << ' ' << 5 * f.quads.size() << '\n';
  for (const auto& q : f.quads) os << "4 " << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
  os << "CELL_TYPES " << f.quads.size() << '\n';
  for (size_t i = 0; i < f.quads.size(); ++i) os << "9\n";
  os << "POINT_DATA " << f.points.size() << '\n';
  auto vectors = [&](const char* name, const std::vector<Eigen::Vector3d>& v) {
    os << "VECTORS " << name << " double\n";
    for (const auto& a : v) os << a.x() << ' ' << a.y() << ' ' << a.z() << '\n';
  };
  auto scalars = [&](const char* name, const std::vector<double>& v) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double a : v) os << a << '\n';
  };
  vectors("displacement", f.displacement);
  scalars("mean_curvature", f.mean_curvature);
  scalars("gauss_curvature", f.gauss_curvature);
  vectors("tau", f.tau);
  vectors("M0", f.M0);
  if (!os) throw std::runtime_error("error while writing '" + path + "'");
}

}  // namespace kls
