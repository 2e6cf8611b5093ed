#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "klshell/benchmarks.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace kls;

TEST_CASE("bundled cases validate and round-trip") {
  const auto all = load_cases(KLS_BENCH_DIR);
  REQUIRE(all.size() >= 16);
  std::set<std::string> ids;
  for (const auto& c : all) {
    CAPTURE(c.id);
    CHECK(ids.insert(c.id).second);
    CHECK(std::find(benchmark_kinds().begin(), benchmark_kinds().end(), c.kind) != benchmark_kinds().end());
    CHECK(!c.schedule.empty());
    const json j = to_json(c);
    CHECK(to_json(case_from_json(j)) == j);
    if (c.reference_source == "none") CHECK(c.references.empty());
  }
}

TEST_CASE("case validation rejects malformed definitions") {
  const json good = json::parse(R"({"id": "p", "kind": "navier_plate", "description": "",
    "params": {"L": 12.0, "T": 0.375, "E": 4.8e5, "nu": 0.38, "p0": 1.0, "eps_factor": 0.01},
    "schedule": [{"degree": 2, "n": 2}], "solver": {"linear": true}})");
  CHECK_NOTHROW(case_from_json(good));
  json j = good;
  j["colour"] = 1;
  CHECK_THROWS_AS(case_from_json(j), ConfigError);
  j = good;
  j["kind"] = "teapot";
  CHECK_THROWS_AS(case_from_json(j), ConfigError);
  j = good;
  j["reference_source"] = "hearsay";
  CHECK_THROWS_AS(case_from_json(j), ConfigError);
  j = good;
  j["params"].erase("E");
  CHECK_THROWS_AS(case_from_json(j), ConfigError);
  j = good;
  j["schedule"] = json::array();
  CHECK_THROWS_AS(case_from_json(j), ConfigError);
}

TEST_CASE("run_case rows and CSV") {
  const json j = json::parse(R"({"id": "p", "kind": "navier_plate", "description": "",
    "params": {"L": 12.0, "T": 0.375, "E": 4.8e5, "nu": 0.38, "p0": 1.0, "eps_factor": 0.01},
    "schedule": [{"degree": 3, "n": 2}, {"degree": 3, "n": 4}], "solver": {"linear": true}})");
  const auto rows = run_case(case_from_json(j));
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.quantity == "w_center");
    CHECK(std::isfinite(r.rel_error));
  }
  CHECK(rows[1].rel_error < rows[0].rel_error);
  std::ostringstream os;
  write_rows(os, rows);
  const std::string s = os.str();
  CHECK(s.rfind("case,model,degree,n,n2,load_factor,quantity,value,reference,rel_error,iterations,wall_seconds,status",
                0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 3);
}

TEST_CASE("failed solves are reported, not thrown") {
  const json j = json::parse(R"({"id": "c", "kind": "cantilever", "description": "",
    "params": {"L": 10.0, "W": 1.0, "T": 0.1, "E": 1.2e6, "nu": 0.0, "eps_factor": 1000.0, "F_factor": 40.0},
    "schedule": [{"degree": 2, "n": 4}], "solver": {"n_load_steps": 1, "max_newton_iter": 2, "max_cuts": 0}})");
  const auto rows = run_case(case_from_json(j));
  REQUIRE(!rows.empty());
  CHECK(rows.back().quantity == "solve");
  CHECK(rows.back().status.rfind("failed", 0) == 0);
}

TEST_CASE("folded strip mesh splits interfaces by kink") {
  PureBendingSolution sol;
  const PureBendingStrip geo(sol, 1.5, 0.5, 1.0, 0.5);
  const auto mesh = make_strip_mesh(geo, {0, 0.5, 1.0, 1.5, 2.0}, {0, 0.5, 1.0}, 2, 2, 1);
  REQUIRE(mesh.patches.size() == 8);
  std::vector<InterfacePair> kinked, smooth;
  classify_interfaces(mesh, kinked, smooth);
  CHECK(kinked.size() == 2);
  CHECK(smooth.size() == 8);
  for (const auto& k : kinked) {
    CHECK(k.a.patch % 4 == 2);
    CHECK(k.b.patch % 4 == 3);
  }
}

TEST_CASE("l2 field difference of a rigid shift is its length") {
  PureBendingSolution sol;
  const PureBendingStrip geo(sol, 1.0, 0.0, 1.0, 0.0);
  auto mesh = make_strip_mesh(geo, {0, 1.0}, {0, 1.0}, 2, 3, 2, 0.1);
  const auto cache = build_element_cache(mesh);
  const Eigen::MatrixX3d X = reference_positions(mesh);
  CHECK(l2_field_difference(cache, X, X) == 0.0);
  const Eigen::RowVector3d d(0.3, -0.4, 1.2);
  CHECK(l2_field_difference(cache, X.rowwise() + d, X) == doctest::Approx(d.norm()).epsilon(1e-12));
}

TEST_CASE("stretched cantilever: mixed follows projected, Koiter departs") {
  BenchmarkCase c;
  for (const auto& k : load_cases(KLS_BENCH_DIR))
    if (k.id == "cantilever_stretch") c = k;
  REQUIRE(c.id == "cantilever_stretch");
  const auto gaps = cross_model_check(c, "mixed", "projected_nh");
  const auto koiter = cross_model_check(c, "koiter", "projected_nh");
  REQUIRE(!gaps.empty());
  REQUIRE(gaps.size() == koiter.size());
  double worst = 0;
  for (const auto& g : gaps) worst = std::max(worst, g.gap);
  CHECK(worst < 0.01);
  CHECK(koiter.back().load_factor == doctest::Approx(1.0));
  CHECK(koiter.back().gap > 0.1);
  // Koiter gap grows with the stretch
  CHECK(koiter.back().gap > koiter[koiter.size() / 2].gap);
}
