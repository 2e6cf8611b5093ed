#pragma once

#include "klshell/analytic.hpp"
#include "klshell/io.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace kls {

/// One mesh level of a refinement schedule. Meaning of n and n2 depends on the case kind;
/// n2 = 0 selects the kind's default.
struct Level {
  int degree = 2;
  int n = 4;
  int n2 = 0;
};

struct BenchmarkCase {
  std::string id, kind, description;
  json params = json::object();  ///< kind-specific physical parameters
  std::vector<Level> schedule;
  std::vector<std::string> models{"koiter"};
  SolverConfig solver;
  /// Reference values of named quantities at the full load; analytic kinds compute their own.
  std::map<std::string, double> references;
  std::string reference_source = "none";  ///< literature | analytic | fixture | none
};

std::vector<std::string> benchmark_kinds();
BenchmarkCase case_from_json(const json& j);
json to_json(const BenchmarkCase& c);
/// All *.json case files of a directory, sorted by id.
std::vector<BenchmarkCase> load_cases(const std::string& dir);

struct Measurement {
  std::string quantity;
  double value = 0;
};

/// A case instantiated at one level for one material model.
struct BenchmarkInstance {
  ShellModel model;
  SolverConfig solver;
  bool per_step = false;  ///< measure after every load step instead of only at the end
  std::function<std::vector<Measurement>(const ShellModel&, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q)>
      measure;
  std::map<std::string, double> references;
};

BenchmarkInstance build_instance(const BenchmarkCase& c, const Level& level, const std::string& model);

struct ResultRow {
  std::string case_id, model;
  Level level;
  double load_factor = 1;
  std::string quantity;
  double value = 0, reference = 0, rel_error = 0;  ///< NaN when undefined
  int iterations = 0;
  double wall_seconds = 0;
  std::string status = "ok";
};

struct RunOptions {
  int threads = 1;
  std::vector<Level> schedule;          ///< overrides the case schedule when nonempty
  std::vector<std::string> models;      ///< overrides the case models when nonempty
};

/// Runs every (model, level) pair; failures are recorded in the rows and the run continues.
std::vector<ResultRow> run_case(const BenchmarkCase& c, const RunOptions& opt = {});
void write_rows(std::ostream& os, const std::vector<ResultRow>& rows);

struct ModelGap {
  Level level;
  double load_factor = 1;
  std::string quantity;
  double gap = 0;  ///< |a - b| / |b|
  double wall_a = 0, wall_b = 0;
};

/// Relative gap between two material models for every level, load step and quantity.
std::vector<ModelGap> cross_model_check(const BenchmarkCase& c, const std::string& model_a, const std::string& model_b,
                                        const RunOptions& opt = {});

// ---------------------------------------------------------------- geometry helpers

/// Strip made of affine patches between the break coordinates along (X) and across (Y)
/// the centerline of geo. Breaks along X must include the kink. Patch (i, j) has index
/// i + nx*j with nx = x_breaks.size() - 1.
MultiPatchMesh make_strip_mesh(const PureBendingStrip& geo, const std::vector<double>& x_breaks,
                               const std::vector<double>& y_breaks, int degree, int n_along, int n_across,
                               double skew = 0.0);

/// Splits interfaces into kinked (reference normals differ) and smooth ones.
void classify_interfaces(const MultiPatchMesh& mesh, std::vector<InterfacePair>& kinked,
                         std::vector<InterfacePair>& smooth);

/// sqrt((1/A) int |u_a - u_b|^2 dA) between two solutions on the same mesh.
double l2_field_difference(const std::vector<ElementCache>& cache, const Eigen::MatrixX3d& xa,
                           const Eigen::MatrixX3d& xb);

/// Largest |H/H_exact - 1| over all quadrature points of the current configuration.
double max_curvature_deviation(const ShellModel& model, const Eigen::MatrixX3d& x, double H_exact);

}  // namespace kls
