// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
#include "klshell/benchmarks.hpp"
#include "klshell/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef KLS_BENCH_DIR
#define KLS_BENCH_DIR "benchmarks"
#endif

using namespace kls;

namespace {

const double NaN = std::numeric_limits<double>::quiet_NaN();

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::map<std::string, BenchmarkCase>& cases() {
  static std::map<std::string, BenchmarkCase> all = [] {
    std::map<std::string, BenchmarkCase> m;
    for (auto& c : load_cases(KLS_BENCH_DIR)) m[c.id] = c;
    return m;
  }();
  return all;
}

const BenchmarkCase& get_case(const std::string& id) {
  auto it = cases().find(id);
  if (it == cases().end()) throw std::runtime_error("missing benchmark case " + id);
  return it->second;
}

// Each case is run at most once per schedule and reused across criteria.
const std::vector<ResultRow>& rows_of(const std::string& id, const std::vector<Level>& schedule = {}) {
  static std::map<std::string, std::vector<ResultRow>> memo;
  std::string key = id;
  for (const Level& l : schedule) key += "/" + std::to_string(l.degree) + "," + std::to_string(l.n);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  RunOptions opt;
  opt.schedule = schedule;
  return memo[key] = run_case(get_case(id), opt);
}

bool all_converged(const std::vector<ResultRow>& rows) {
  return std::none_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.status != "ok"; });
}

double pick(const std::vector<ResultRow>& rows, const std::string& model, int n, const std::string& q,
            double lambda = 1.0) {
  for (const ResultRow& r : rows)
    if (r.model == model && r.level.n == n && r.quantity == q && std::abs(r.load_factor - lambda) < 1e-9)
      return r.value;
  return NaN;
}

double wall(const std::vector<ResultRow>& rows) {
  // rows of one solve share its wall time
  std::map<std::string, double> per_solve;
  for (const ResultRow& r : rows)
    per_solve[r.model + "/" + std::to_string(r.level.degree) + "/" + std::to_string(r.level.n)] = r.wall_seconds;
  double t = 0;
  for (const auto& [k, v] : per_solve) t += v;
  return t;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Least-squares slope of log(err) against log(1/n).
double fitted_rate(const std::vector<int>& n, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(n.size());
  for (size_t i = 0; i < n.size(); ++i) {
    const double x = -std::log(static_cast<double>(n[i])), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

bool decreasing(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return v.size() > 1;
}

std::vector<int> levels_of(const BenchmarkCase& c) {
  std::vector<int> n;
  for (const Level& l : c.schedule) n.push_back(l.n);
  return n;
}

std::vector<double> series(const std::string& id, const std::string& q) {
  const BenchmarkCase& c = get_case(id);
  const auto& rows = rows_of(id);
  std::vector<double> out;
  for (int n : levels_of(c)) out.push_back(pick(rows, c.models.front(), n, q));
  return out;
}

// ---------------------------------------------------------------- criteria

Verdict tangents() {
  const auto t0 = std::chrono::steady_clock::now();
  double stress = 0, tangent = 0, mesh = 0;
  for (const std::string& name : verification_law_names()) {
    const MaterialLaw law = verification_law(name);
    const MaterialCheck mc = check_material(law, 50, 12345u);
    stress = std::max(stress, mc.stress_err);
    tangent = std::max(tangent, mc.tangent_err);
    for (const MeshCheck& e : check_meshes(law, 12345u)) mesh = std::max(mesh, e.err);
  }
  const double t = seconds_since(t0);
  return {stress <= 1e-5 && tangent <= 1e-4 && mesh <= 1e-5 && t < 60.0,
          "stress " + fmt("%.2e", stress) + ", material tangent " + fmt("%.2e", tangent) + ", element/global " +
              fmt("%.2e", mesh) + ", " + fmt("%.1f s", t)};
}

Verdict flugge() {
  const auto t0 = std::chrono::steady_clock::now();
  FluggeSolution s;
  const double w80 = std::abs(flugge_load_point(s).uvw.z());
  s.M = s.N = 8192;
  s.early_stop = true;
  const double wh = std::abs(flugge_load_point(s).uvw.z());
  const double t = seconds_since(t0);
  const double e80 = std::abs(w80 / 1.82488e-5 - 1), eh = std::abs(wh / 1.827158e-5 - 1);
  return {e80 <= 1e-4 && eh <= 1e-6 && t < 120.0, "80x80 " + fmt("%.7e", w80) + " (rel " + fmt("%.1e", e80) +
                                                      "), high truncation " + fmt("%.8e", wh) + " (rel " +
                                                      fmt("%.1e", eh) + "), " + fmt("%.1f s", t)};
}

Verdict linear_cylinder() {
  const auto& rows = rows_of("pinched_cylinder_linear");
  std::vector<double> err;
  std::string d;
  for (int n : levels_of(get_case("pinched_cylinder_linear"))) {
    err.push_back(NaN);
    for (const ResultRow& r : rows)
      if (r.model == "koiter" && r.level.n == n && r.quantity == "wA") err.back() = r.rel_error;
    d += (d.empty() ? "" : ", ") + std::to_string(n) + ": " + fmt("%.2e", err.back());
  }
  const double t = wall(rows);
  return {all_converged(rows) && err.back() <= 0.02 && decreasing(err) && t < 300.0,
          "rel. error " + d + ", " + fmt("%.1f s", t)};
}

Verdict linear_hemisphere() {
  const BenchmarkCase& c = get_case("pinched_hemisphere_linear");
  const Level finest = c.schedule.back();
  const auto& rows = rows_of(c.id, {finest});
  double err = 0, gap = 0;
  for (const std::string q : {"uA", "uB"}) {
    const double k = pick(rows, "koiter", finest.n, q), p = pick(rows, "projected_nh", finest.n, q);
    err = std::max({err, std::abs(k / 0.0924 - 1), std::abs(p / 0.0924 - 1)});
    gap = std::max(gap, std::abs(k - p) / std::abs(p));
  }
  return {all_converged(rows) && err <= 0.02 && gap < 0.005,
          "uA " + fmt("%.6f", pick(rows, "koiter", finest.n, "uA")) + ", max rel. error " + fmt("%.2e", err) +
              ", Koiter/projected gap " + fmt("%.2e", gap)};
}

Verdict navier() {
  const BenchmarkCase& c = get_case("navier_plate");
  const Level finest = c.schedule.back();
  const auto& rows = rows_of(c.id, {finest});
  double err = NaN;
  for (const ResultRow& r : rows)
    if (r.quantity == "w_center") err = r.rel_error;
  return {all_converged(rows) && err <= 0.005, "center deflection rel. error " + fmt("%.2e", err)};
}

Verdict pure_bending() {
  const std::vector<int> n = levels_of(get_case("flat_strip_single"));
  const auto single = series("flat_strip_single", "l2_error"), two = series("flat_strip_two_patch", "l2_error");
  const auto skew1 = series("flat_strip_single_skew", "l2_error"), skew2 = series("flat_strip_two_patch_skew", "l2_error");
  const double rate = fitted_rate(n, single);
  double worst_ratio = 1;
  for (size_t i = 0; i < n.size(); ++i) worst_ratio = std::max({worst_ratio, two[i] / single[i], single[i] / two[i]});
  const double rate_skew = std::min(fitted_rate(n, skew1), fitted_rate(n, skew2));
  bool ok = all_converged(rows_of("flat_strip_single")) && all_converged(rows_of("flat_strip_two_patch")) &&
            all_converged(rows_of("flat_strip_single_skew")) && all_converged(rows_of("flat_strip_two_patch_skew"));
  // same order of magnitude: within a factor 10 at every level
  ok = ok && rate >= 2.0 && worst_ratio < 10.0 && decreasing(skew1) && decreasing(skew2) && rate_skew >= 1.0;
  return {ok, "single-patch rate " + fmt("%.2f", rate) + ", two-patch/single ratio <= " + fmt("%.3f", worst_ratio) +
                  ", skew rate " + fmt("%.2f", rate_skew) + ", finest errors " + fmt("%.2e", single.back()) + " / " +
                  fmt("%.2e", two.back()) + " / " + fmt("%.2e", skew1.back()) + " / " + fmt("%.2e", skew2.back())};
}

const std::vector<std::string> kFolded = {"folded_strip_penalty", "folded_strip_lm_n2q0", "folded_strip_lm_n2q1c"};

// Penalty solution at one level for an overridden epsilon factor, and the N2Q0 solution.
double penalty_lm_gap(double eps_factor, const Level& level) {
  static std::map<int, Eigen::MatrixX3d> lm;
  if (!lm.count(level.n)) {
    BenchmarkInstance in = build_instance(get_case("folded_strip_lm_n2q0"), level, "canham_nh");
    const SolveResult r = newton_solve(in.model, in.solver);
    if (!r.converged) throw std::runtime_error("multiplier reference did not converge: " + r.message);
    lm[level.n] = r.x;
  }
  BenchmarkCase c = get_case("folded_strip_penalty");
  c.params["eps_factor"] = eps_factor;
  BenchmarkInstance in = build_instance(c, level, "canham_nh");
  const SolveResult r = newton_solve(in.model, in.solver);
  if (!r.converged) return NaN;
  return l2_field_difference(in.model.cache, r.x, lm[level.n]);
}

Verdict folded_strip() {
  double h = 0;
  for (const std::string& id : kFolded) {
    const auto h_series = series(id, "H_max_rel_dev");
    h = std::max(h, h_series.back());
  }
  std::vector<double> gaps;
  std::string gd;
  const Level sweep{2, 4, 0};
  for (double e : {1e1, 1e2, 1e3, 1e4}) {
    gaps.push_back(penalty_lm_gap(e, sweep));
    gd += (gd.empty() ? "" : ", ") + fmt("%.2e", gaps.back());
  }
  const auto e0 = series("folded_strip_lm_n2q0", "l2_error"), e1 = series("folded_strip_lm_n2q1c", "l2_error");
  double interp = 0;
  for (size_t i = 0; i < e0.size(); ++i) interp = std::max(interp, std::abs(e0[i] - e1[i]) / e1[i]);
  bool ok = std::all_of(kFolded.begin(), kFolded.end(), [](const std::string& id) { return all_converged(rows_of(id)); });
  ok = ok && h <= 0.01 && decreasing(gaps) && interp <= 1e-3;
  return {ok, "max |H/H_exact - 1| " + fmt("%.2e", h) + ", penalty-LM gap at eps factor 1e1..1e4: " + gd +
                  ", N2Q0/N2Q1c error gap " + fmt("%.2e", interp)};
}

Verdict cantilever() {
  const auto& reg = rows_of("cantilever_shear");
  const auto& skw = rows_of("cantilever_shear_skew");
  const BenchmarkCase& c = get_case("cantilever_shear");
  const int n = c.schedule.front().n, steps = c.solver.n_load_steps;
  double gap = 0;
  int max_it = 0, compared = 0;
  for (int k = 1; k <= steps; ++k) {
    const double lam = static_cast<double>(k) / steps;
    for (const std::string q : {"w_tip", "v_tip"}) {
      const double a = pick(reg, "koiter", n, q, lam), b = pick(skw, "koiter", n, q, lam);
      gap = std::max(gap, std::abs(a - b) / std::abs(a));
      compared += std::isfinite(a) && std::isfinite(b);
    }
  }
  for (const auto* rows : {&reg, &skw})
    for (const ResultRow& r : *rows) max_it = std::max(max_it, r.iterations);
  const bool ok = all_converged(reg) && all_converged(skw) && compared == 2 * steps && gap <= 0.01 && max_it <= 30;
  return {ok, "regular/skew max tip gap " + fmt("%.2e", gap) + " over " + std::to_string(steps) +
                  " steps, max Newton iterations per step " + std::to_string(max_it)};
}

Verdict moment_transmission() {
  double dev = 0;
  for (const std::string& id : kFolded)
    for (double d : series(id, "moment_rel_dev")) dev = std::max(dev, std::isfinite(d) ? d : 1.0);
  return {dev <= 0.01, "max |m_tau/M - 1| over all folded-strip levels and methods " + fmt("%.2e", dev)};
}

Verdict nonlinear_checkpoints() {
  bool ok = true;
  std::string d;
  for (const std::string id : {"hemisphere_hole_nonlinear", "pinched_cylinder_nonlinear", "spreading_cylinder"}) {
    const auto& rows = rows_of(id);
    double err = 0;
    int checked = 0;
    for (const ResultRow& r : rows)
      if (std::abs(r.load_factor - 1) < 1e-12 && std::isfinite(r.reference)) {
        err = std::max(err, std::isfinite(r.rel_error) ? r.rel_error : 1.0);
        ++checked;
      }
    ok = ok && all_converged(rows) && checked == static_cast<int>(get_case(id).references.size()) && checked > 0 &&
         err <= 0.05;
    d += (d.empty() ? "" : ", ") + id + " " + fmt("%.2e", err);
  }
  return {ok, "max rel. deviation from fixtures: " + d};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"tangent consistency", tangents},
      {"Fluegge series", flugge},
      {"linear pinched cylinder", linear_cylinder},
      {"linear pinched hemisphere", linear_hemisphere},
      {"Navier plate", navier},
      {"pure bending, flat strip", pure_bending},
      {"folded strip", folded_strip},
      {"nonlinear cantilever", cantilever},
      {"constraint moment transmission", moment_transmission},
      {"nonlinear checkpoints", nonlinear_checkpoints},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << " (" << criteria[i].first << "): " << v.detail
              << " [" << fmt("%.0f s", seconds_since(t0)) << "]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed\n" : "all criteria passed\n");
  return failed ? 1 : 0;
}
