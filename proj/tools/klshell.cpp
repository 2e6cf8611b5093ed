#include "CLI11.hpp"

#include "klshell/verify.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#ifndef KLS_BENCH_DIR
#define KLS_BENCH_DIR "benchmarks"
#endif

using namespace kls;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, config_error = 2, solver_failure = 3, verification_failure = 4 };

struct Common {
  std::string out = ".";
  int threads = 1;
  bool deterministic = false;
  int effective_threads() const { return deterministic ? 1 : std::max(1, threads); }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Assembly threads")->check(CLI::PositiveNumber);
  app->add_flag("--deterministic", c.deterministic, "Serial assembly for bitwise reproducible results");
}

fs::path ensure_dir(const std::string& d) {
  fs::create_directories(d);
  return fs::path(d);
}

int cmd_run(const std::string& config, const Common& common) {
  const fs::path cfg_path(config);
  const std::string base = cfg_path.has_parent_path() ? cfg_path.parent_path().string() : ".";
  const RunConfig rc = parse_run_config(read_json_file(config), base);
  const ShellModel model = build_model(rc, base);
  SolverConfig cfg = rc.solver;
  cfg.threads = common.effective_threads();
  std::cout << "model: " << model.mesh.patches.size() << " patches, " << model.mesh.elements().size() << " elements, "
            << model.n_dofs() << " unknowns\n";
  const SolveResult r = newton_solve(model, cfg);
  const fs::path out = ensure_dir(common.out);
  {
    std::ofstream os(out / rc.outputs.csv);
    CsvWriter w(os, {"step", "load_factor", "iterations", "probe", "ux", "uy", "uz"});
    int k = 0;
    for (const StepRecord& s : r.steps) {
      ++k;
      if (!s.converged) continue;
      for (const ProbeSpec& p : rc.outputs.probes) {
        const Eigen::Vector3d d = probe_displacement(model.mesh, s.x, p.patch, p.u, p.v);
        w.cell(k).cell(s.lambda).cell(s.iterations).cell(p.name).cell(d.x()).cell(d.y()).cell(d.z()).end_row();
      }
    }
  }
  if (!rc.outputs.vtk.empty())
    write_vtk(sample_fields(model, r.x, rc.outputs.vtk_resolution), (out / rc.outputs.vtk).string());
  for (const ProbeSpec& p : rc.outputs.probes) {
    const Eigen::Vector3d d = probe_displacement(model.mesh, r.x, p.patch, p.u, p.v);
    std::cout << std::setprecision(10) << p.name << ": " << d.transpose() << "\n";
  }
  std::cout << (r.converged ? "converged" : "not converged: " + r.message) << " in " << r.wall_seconds << " s\n";
  return r.converged ? ok : solver_failure;
}

int cmd_bench(std::vector<std::string> ids, const std::string& dir, const Common& common) {
  const std::vector<BenchmarkCase> cases = load_cases(dir);
  if (ids.empty())
    for (const auto& c : cases) ids.push_back(c.id);
  const fs::path out = ensure_dir(common.out);
  bool failed = false;
  for (const std::string& id : ids) {
    const auto it = std::find_if(cases.begin(), cases.end(), [&](const auto& c) { return c.id == id; });
    if (it == cases.end()) throw ConfigError("unknown benchmark case '" + id + "'");
    RunOptions opt;
    opt.threads = common.effective_threads();
    const auto rows = run_case(*it, opt);
    std::ofstream os(out / (id + ".csv"));
    write_rows(os, rows);
    std::cout << id << ":\n";
    for (const ResultRow& r : rows) {
      if (r.status != "ok") failed = true;
      std::cout << "  " << std::left << std::setw(12) << r.model << " p=" << r.level.degree << " n=" << r.level.n;
      if (r.level.n2) std::cout << "x" << r.level.n2;
      std::cout << " lambda=" << std::setprecision(4) << r.load_factor << " " << r.quantity << "="
                << std::setprecision(8) << r.value;
      if (!std::isnan(r.reference))
        std::cout << " ref=" << r.reference << " err=" << std::setprecision(3) << r.rel_error;
      if (r.status != "ok") std::cout << " [" << r.status << "]";
      std::cout << "\n";
    }
  }
  return failed ? solver_failure : ok;
}

int cmd_verify(const std::string& model, int states, unsigned seed) {
  std::vector<std::string> names = model == "all" ? verification_law_names() : std::vector<std::string>{model};
  bool pass = true;
  std::cout << std::scientific << std::setprecision(2);
  for (const std::string& name : names) {
    MaterialLaw law;
    try {
      law = verification_law(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const MaterialCheck mc = check_material(law, states, seed);
    std::cout << name << ": stress " << mc.stress_err << ", material tangent " << mc.tangent_err;
    pass = pass && mc.stress_err <= 1e-5 && mc.tangent_err <= 1e-4;
    for (const MeshCheck& e : check_meshes(law, seed)) {
      std::cout << ", " << e.mesh << " " << e.err;
      pass = pass && e.err <= 1e-5;
    }
    std::cout << "\n";
  }
  std::cout << (pass ? "all tangents consistent\n" : "tangent check FAILED\n");
  return pass ? ok : verification_failure;
}

int cmd_flugge(int terms, bool early, double stop_tol) {
  FluggeSolution s;
  s.M = s.N = terms;
  s.early_stop = early;
  s.stop_tol = stop_tol;
  const auto t0 = std::chrono::steady_clock::now();
  const FluggeResult r = flugge_load_point(s);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << std::setprecision(10) << "deflection under the load: " << std::abs(r.uvw.z()) << "\n"
            << "terms: " << terms << " x " << terms << ", axial orders summed: " << r.n_orders
            << (r.stopped_early ? " (stopped early)" : "") << ", " << dt << " s\n";
  return ok;
}

int cmd_info(const std::string& dir) {
  std::cout << "klshell: isogeometric Kirchhoff-Love shell solver\n"
            << "hardware threads: " << std::thread::hardware_concurrency() << "\n"
            << "material models:";
  for (const auto& n : verification_law_names()) std::cout << " " << n;
  std::cout << "\nbenchmark kinds:";
  for (const auto& k : benchmark_kinds()) std::cout << " " << k;
  std::cout << "\nbenchmark cases in " << dir << ":\n";
  for (const auto& c : load_cases(dir)) std::cout << "  " << std::left << std::setw(32) << c.id << c.description << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isogeometric Kirchhoff-Love shell solver"};
  app.require_subcommand(1);
  Common common;

  std::string config;
  auto* run = app.add_subcommand("run", "Solve one configuration");
  run->add_option("config,--config", config, "Configuration file");
  add_common(run, common);

  std::vector<std::string> cases;
  std::string bench_dir = KLS_BENCH_DIR;
  auto* bench = app.add_subcommand("bench", "Run benchmark cases (all when none given)");
  bench->add_option("cases,--case", cases, "Case ids");
  bench->add_option("--dir", bench_dir, "Directory with case files");
  add_common(bench, common);

  std::string model = "all";
  int states = 50;
  unsigned seed = 12345;
  auto* verify = app.add_subcommand("verify-tangents", "Finite-difference consistency suite");
  verify->add_option("--model", model, "Material model or 'all'");
  verify->add_option("--states", states, "Random states per model")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "Random seed");
  add_common(verify, common);

  int terms = 80;
  bool early = false;
  double stop_tol = 1e-12;
  auto* flugge = app.add_subcommand("flugge", "Fourier solution of the pinched cylinder");
  flugge->add_option("--terms", terms, "Fourier terms per direction")->check(CLI::PositiveNumber);
  flugge->add_flag("--early-stop", early, "Stop once axial orders no longer change the sum");
  flugge->add_option("--stop-tol", stop_tol, "Relative early-stop threshold");

  auto* info = app.add_subcommand("info", "List models and benchmark cases");
  info->add_option("--dir", bench_dir, "Directory with case files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : config_error;
  }

  try {
    if (*run) {
      if (config.empty()) throw ConfigError("run: no configuration file given");
      return cmd_run(config, common);
    }
    if (*bench) return cmd_bench(cases, bench_dir, common);
    if (*verify) return cmd_verify(model, states, seed);
    if (*flugge) return cmd_flugge(terms, early, stop_tol);
    if (*info) return cmd_info(bench_dir);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return solver_failure;
  }
  return ok;
}
