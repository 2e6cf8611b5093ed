#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "klshell/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace kls;
namespace fs = std::filesystem;

namespace {

json sample_config() {
  return json::parse(R"({
    "mesh": {"primitive": {"kind": "plate", "degree": 3, "n_u": 2, "n_v": 2, "Lx": 2.0, "Ly": 1.0},
             "elements": [4, 2]},
    "material": {"law": "koiter", "E": 1000.0, "nu": 0.3, "T": 0.1},
    "constraints": [{"kind": "clamp", "method": "penalty", "epsilon": 1e5,
                     "edges": [{"patch": 0, "side": "u0"}]}],
    "dirichlet": [{"edges": [{"patch": 0, "side": "u0"}], "fix": [true, true, true]}],
    "loads": {"point": [{"patch": 0, "u": 1.0, "v": 0.5, "F": [0, 0, 1e-3]}],
              "moment": [{"edges": [{"patch": 0, "side": "u1"}], "m": 0.5, "live": false}]},
    "solver": {"n_load_steps": 2, "linear": true},
    "outputs": {"probes": [{"name": "tip", "patch": 0, "u": 1.0, "v": 0.5}], "vtk": "f.vtk"}
  })");
}

struct VtkData {
  size_t n_points = 0;
  std::map<std::string, std::vector<double>> arrays;
};

// Minimal legacy-VTK reader for point data arrays.
VtkData read_vtk(const std::string& path) {
  std::ifstream in(path);
  VtkData d;
  std::string tok;
  while (in >> tok) {
    if (tok == "POINTS") {
      in >> d.n_points >> tok;
      double skip;
      for (size_t i = 0; i < 3 * d.n_points; ++i) in >> skip;
    } else if (tok == "SCALARS" || tok == "VECTORS") {
      const size_t width = tok == "SCALARS" ? 1 : 3;
      std::string name, type;
      in >> name >> type;
      if (width == 1) in >> tok >> tok >> tok;  // "1 LOOKUP_TABLE default"
      auto& a = d.arrays[name];
      a.resize(width * d.n_points);
      for (double& v : a) in >> v;
    }
  }
  return d;
}

}  // namespace

TEST_CASE("config round trip is a fixpoint") {
  const RunConfig c1 = parse_run_config(sample_config());
  const json j1 = to_json(c1);
  const json j2 = to_json(parse_run_config(j1));
  CHECK(j1 == j2);
  CHECK(c1.mesh.refine_u == 4);
  CHECK(c1.solver.n_load_steps == 2);
  CHECK(std::get<Koiter>(c1.material).T == 0.1);
}

TEST_CASE("mesh json round trip") {
  PrimitiveSpec s;
  s.kind = "cylinder";
  s.degree = 2;
  s.n_u = 3;
  s.n_v = 2;
  const MultiPatchMesh m = make_primitive(s);
  const MultiPatchMesh m2 = mesh_from_json(json::parse(mesh_to_json(m).dump()));
  CHECK(mesh_to_json(m) == mesh_to_json(m2));
  CHECK(m2.n_nodes() == m.n_nodes());
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(read_json_file("does/not/exist.json"), ConfigError);
  json j = sample_config();
  j["solver"]["tolerance"] = 1e-6;
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
  j = sample_config();
  j["material"]["law"] = "rubber";
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
  j = sample_config();
  j["constraints"][0]["epsilon"] = 0.0;
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
  j = sample_config();
  j["dirichlet"][0]["sets"] = {"nowhere"};
  CHECK_THROWS_AS(build_model(parse_run_config(j)), ConfigError);
  j = sample_config();
  j["loads"]["traction"] = {{{"edges", {{{"patch", 3}, {"side", "v0"}}}}, {"t", {0, 0, 1}}}};
  CHECK_THROWS_AS(build_model(parse_run_config(j)), ConfigError);
  j = sample_config();
  j["mesh"]["file"] = "x.json";
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
}

TEST_CASE("model build and linear run with probe") {
  const ShellModel m = build_model(parse_run_config(sample_config()));
  CHECK(m.mesh.elements().size() == 8);
  SolverConfig cfg;
  cfg.linear = true;
  const SolveResult r = newton_solve(m, cfg);
  REQUIRE(r.converged);
  const Eigen::Vector3d d = probe_displacement(m.mesh, r.x, 0, 1.0, 0.5);
  // positive moment on the u1 edge of a +z-normal plate bends it toward -z
  CHECK(d.z() < 0);
  // probe at a clamped corner sits on fixed control points
  CHECK(probe_displacement(m.mesh, r.x, 0, 0.0, 0.0).norm() == 0.0);
}

TEST_CASE("csv escaping and row width") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
  std::ostringstream os;
  CsvWriter w(os, {"name", "value", "n"});
  w.cell("x,y").cell(0.5).cell(3).end_row();
  CHECK(os.str() == "name,value,n\r\n\"x,y\",0.5,3\r\n");
  w.cell("only");
  CHECK_THROWS(w.end_row());
}

TEST_CASE("flat plate fields have zero mean curvature") {
  const ShellModel m = build_model(parse_run_config(sample_config()));
  const FieldOutput f = sample_fields(m, reference_positions(m.mesh), 3);
  CHECK(f.points.size() == 8 * 9);
  CHECK(f.quads.size() == 8 * 4);
  for (size_t i = 0; i < f.points.size(); ++i) {
    CHECK(f.mean_curvature[i] == doctest::Approx(0.0));
    CHECK(f.gauss_curvature[i] == doctest::Approx(0.0));
    CHECK(f.displacement[i].norm() == 0.0);
  }
  CHECK_THROWS(sample_fields(m, reference_positions(m.mesh), 1));
}

TEST_CASE("sphere reference fields and vtk re-read") {
  json j = sample_config();
  j["mesh"] = json::parse(R"({"primitive": {"kind": "hemisphere", "degree": 3, "R": 10.0,
                              "polar_min": 18, "polar_max": 90, "phi0": 0, "phi1": 90}, "elements": [3, 3]})");
  const ShellModel m = build_model(parse_run_config(j));
  const FieldOutput f = sample_fields(m, reference_positions(m.mesh), 4);
  for (size_t i = 0; i < f.points.size(); ++i) {
    CHECK(f.gauss_curvature[i] == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(std::abs(f.mean_curvature[i]) == doctest::Approx(0.1).epsilon(1e-9));
  }
  const fs::path path = fs::temp_directory_path() / "klshell_test_fields.vtk";
  write_vtk(f, path.string());
  const VtkData d = read_vtk(path.string());
  REQUIRE(d.n_points == f.points.size());
  for (const char* name : {"displacement", "mean_curvature", "gauss_curvature", "tau", "M0"})
    CHECK(d.arrays.count(name) == 1);
  for (size_t i = 0; i < f.points.size(); ++i) {
    CHECK(d.arrays.at("gauss_curvature")[i] == doctest::Approx(f.gauss_curvature[i]).epsilon(1e-10));
    CHECK(d.arrays.at("mean_curvature")[i] == doctest::Approx(f.mean_curvature[i]).epsilon(1e-10));
    for (int k = 0; k < 3; ++k) CHECK(d.arrays.at("displacement")[3 * i + k] == doctest::Approx(f.displacement[i][k]));
  }
  fs::remove(path);
}
