#pragma once

#include "klshell/solver.hpp"

#include "json.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace kls {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reads a JSON file; throws ConfigError on IO or syntax errors.
json read_json_file(const std::string& path);

// ---------------------------------------------------------------- pieces

MaterialLaw material_from_json(const json& j);
json to_json(const MaterialLaw& law);

json mesh_to_json(const MultiPatchMesh& mesh);
MultiPatchMesh mesh_from_json(const json& j);

EdgeRef edge_from_json(const json& j);
json to_json(const EdgeRef& e);

EdgeConstraint constraint_from_json(const json& j);
json to_json(const EdgeConstraint& c);

LoadCase loads_from_json(const json& j);
json to_json(const LoadCase& l);

SolverConfig solver_from_json(const json& j);
json to_json(const SolverConfig& s);

// ---------------------------------------------------------------- run config

/// Mesh given inline, by file, or by primitive recipe, with optional refinement and skew.
struct MeshSource {
  std::optional<PrimitiveSpec> primitive;
  std::string file;
  std::optional<json> inline_mesh;
  int refine_u = 1, refine_v = 1;  ///< target element counts per patch (never coarsens)
  double skew = 0.0;
};

/// Prescribed displacement of a node selection. Selections combine named sets,
/// patch sides and (patch, control point) pairs.
struct DirichletSpec {
  std::vector<std::string> sets;
  std::vector<EdgeRef> edges;
  std::vector<std::pair<int, int>> points;
  std::array<bool, 3> fix{true, true, true};
  Eigen::Vector3d value = Eigen::Vector3d::Zero();
  bool proportional = false;
};

struct ProbeSpec {
  std::string name;
  int patch = 0;
  double u = 0, v = 0;
};

struct OutputSpec {
  std::vector<ProbeSpec> probes;
  std::string vtk;  ///< file name inside the output directory; empty: none
  int vtk_resolution = 3;
  std::string csv = "probes.csv";
};

struct RunConfig {
  MeshSource mesh;
  MaterialLaw material = Koiter{};
  std::vector<EdgeConstraint> constraints;
  std::vector<DirichletSpec> dirichlet;
  LoadCase loads;
  SolverConfig solver;
  OutputSpec outputs;
};

/// Validates and parses; relative file paths are resolved against base_dir.
RunConfig parse_run_config(const json& j, const std::string& base_dir = ".");
json to_json(const RunConfig& c);

MultiPatchMesh build_mesh(const MeshSource& src, const std::string& base_dir = ".");
/// Builds and prepares the model; checks that referenced sets, patches and sides exist.
ShellModel build_model(const RunConfig& c, const std::string& base_dir = ".");

/// Displacement at a parametric point of a patch.
Eigen::Vector3d probe_displacement(const MultiPatchMesh& mesh, const Eigen::MatrixX3d& x, int patch, double u,
                                   double v);

// ---------------------------------------------------------------- output

/// RFC 4180 style CSV writer with a header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v);
  CsvWriter& cell(int v);
  void end_row();

 private:
  std::ostream& os_;
  size_t n_cols_, col_ = 0;
};
std::string csv_escape(const std::string& s);

/// Fields sampled on a uniform grid inside every element.
struct FieldOutput {
  std::vector<Eigen::Vector3d> points;  ///< current positions
  std::vector<Eigen::Vector3d> displacement;
  std::vector<double> mean_curvature, gauss_curvature;
  std::vector<Eigen::Vector3d> tau, M0;  ///< contravariant components (11, 22, 12)
  std::vector<std::array<int, 4>> quads;
};

FieldOutput sample_fields(const ShellModel& model, const Eigen::MatrixX3d& x, int resolution = 3);
void write_vtk(const FieldOutput& f, const std::string& path);

}  // namespace kls
