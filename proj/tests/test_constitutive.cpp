#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "klshell/constitutive.hpp"
#include "klshell/quadrature.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace kls;
using kls::test::rel_err;
using kls::test::uniform;

namespace {

Mat2 rand_sym(double s) {
  const double x = uniform(-s, s), y = uniform(-s, s), z = uniform(-s, s);
  Mat2 m;
  m << x, z, z, y;
  return m;
}

SurfaceStrainInput random_state(double strain = 0.2) {
  SurfaceStrainInput in;
  in.A = Mat2::Identity() * uniform(0.8, 1.5) + rand_sym(0.3);
  in.B = rand_sym(0.4);
  in.a = in.A + rand_sym(strain);
  in.b = in.B + rand_sym(strain);
  return in;
}

/// Perturb component I of a (which = 0) or b (which = 1) symmetrically.
SurfaceStrainInput perturbed(SurfaceStrainInput in, int which, int I, double h) {
  Mat2& m = which == 0 ? in.a : in.b;
  const int ij[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  m(ij[I][0], ij[I][1]) += h;
  if (I == 2) m(1, 0) += h;
  return in;
}

/// Frozen-coefficient thickness energy of the projected model under metric-weighted reduction.
double projected_energy(const Projected& m, const SurfaceStrainInput& base, const SurfaceStrainInput& in) {
  const double H0 = 0.5 * base.A.inverse().cwiseProduct(base.B).sum();
  const double k0 = base.B.determinant() / base.A.determinant();
  const double H = 0.5 * base.a.inverse().cwiseProduct(base.b).sum();
  const double kap = base.b.determinant() / base.a.determinant();
  const GaussRule gr = gauss_legendre(m.n_gauss);
  double W = 0;
  for (int q = 0; q < m.n_gauss; ++q) {
    const double xi = 0.5 * m.T * gr.x[q], w = 0.5 * m.T * gr.w[q];
    const double s0 = 1 - 2 * H0 * xi + k0 * xi * xi;
    const Mat2 G = (1 - xi * xi * k0) * base.A + (-2 * xi + 2 * H0 * xi * xi) * base.B;
    const Mat2 g = (1 - xi * xi * kap) * in.a + (-2 * xi + 2 * H * xi * xi) * in.b;
    const double Js = std::sqrt(g.determinant() / G.determinant());
    const double I1 = G.inverse().cwiseProduct(g).sum();
    double Wt;
    if (m.law == Law3D::CompressibleNH) {
      const double l3 = solve_lambda3(m.law, m.Lambda3, m.mu3, Js);
      const double J3 = Js * l3;
      Wt = 0.25 * m.Lambda3 * (J3 * J3 - 1 - 2 * std::log(J3)) + 0.5 * m.mu3 * (I1 + l3 * l3 - 3 - 2 * std::log(J3));
    } else {
      Wt = 0.5 * m.mu3 * (I1 + 1.0 / (Js * Js) - 3);
    }
    W += w * s0 * Wt;
  }
  return W;
}

using EnergyFn = std::function<double(const SurfaceStrainInput&)>;

/// tau and M0 from central differences of an energy.
StressState fd_stress(const EnergyFn& W, const SurfaceStrainInput& in, double h) {
  StressState s;
  Eigen::Vector3d t, m;
  for (int I = 0; I < 3; ++I) {
    const double dWa = (W(perturbed(in, 0, I, h)) - W(perturbed(in, 0, I, -h))) / (2 * h);
    const double dWb = (W(perturbed(in, 1, I, h)) - W(perturbed(in, 1, I, -h))) / (2 * h);
    t[I] = I < 2 ? 2 * dWa : dWa;
    m[I] = I < 2 ? dWb : 0.5 * dWb;
  }
  s.tau = unvoigt(t);
  s.M0 = unvoigt(m);
  return s;
}

TangentSet fd_tangent(const MaterialLaw& law, const SurfaceStrainInput& in, double h) {
  TangentSet t;
  for (int J = 0; J < 3; ++J) {
    const auto ap = evaluate(law, perturbed(in, 0, J, h), false).stress;
    const auto am = evaluate(law, perturbed(in, 0, J, -h), false).stress;
    const auto bp = evaluate(law, perturbed(in, 1, J, h), false).stress;
    const auto bm = evaluate(law, perturbed(in, 1, J, -h), false).stress;
    const double fa = J < 2 ? 2.0 : 1.0, fb = J < 2 ? 1.0 : 0.5;
    t.C.col(J) = fa * (voigt(ap.tau) - voigt(am.tau)) / (2 * h);
    t.E.col(J) = fa * (voigt(ap.M0) - voigt(am.M0)) / (2 * h);
    t.D.col(J) = fb * (voigt(bp.tau) - voigt(bm.tau)) / (2 * h);
    t.F.col(J) = fb * (voigt(bp.M0) - voigt(bm.M0)) / (2 * h);
  }
  return t;
}

double tangent_err(const TangentSet& a, const TangentSet& b) {
  const double scale = std::max({a.C.norm(), a.D.norm(), a.E.norm(), a.F.norm(), 1e-12});
  return std::max({(a.C - b.C).norm(), (a.D - b.D).norm(), (a.E - b.E).norm(), (a.F - b.F).norm()}) / scale;
}

std::vector<MaterialLaw> all_laws() {
  const auto [L3, m3] = lame_3d(3.0, 0.3);
  Projected pc{Law3D::CompressibleNH, L3, m3, 0.1, 3, Reduction::metric_weighted};
  Projected pi{Law3D::IncompressibleNH, 0.0, m3, 0.1, 4, Reduction::metric_weighted};
  return {Koiter{2.0, 1.5, 0.1}, CanhamNH{5.0, 10.0, 1.0}, MixedKoiterNH{2.0, 1.5, 0.1}, pc, pi};
}

}  // namespace

TEST_CASE("surface and 3D Lame parameters") {
  auto [L0, m0] = lame_2d_from_3d(2.0, 0.0, 0.5);
  CHECK(L0 == 0.0);
  CHECK(m0 == doctest::Approx(0.5 * 2.0 / 2));
  // Frozen values for E = 6.825e7, nu = 0.3, T = 0.04.
  auto [L, m] = lame_2d_from_3d(6.825e7, 0.3, 0.04);
  const double Lt = 6.825e7 * 0.3 / (1.3 * 0.4), mt = 6.825e7 / 2.6;
  CHECK(L == doctest::Approx(0.04 * 2 * Lt * mt / (Lt + 2 * mt)).epsilon(1e-14));
  CHECK(m == doctest::Approx(0.04 * mt).epsilon(1e-14));
  CHECK(L == doctest::Approx(900000.0).epsilon(1e-12));
  CHECK(m == doctest::Approx(1050000.0).epsilon(1e-12));
  auto [L2, m2] = lame_2d_from_3d(6.825e7, 0.3, 0.08);
  CHECK(L2 == doctest::Approx(2 * L));
  CHECK(m2 == doctest::Approx(2 * m));
  CHECK_THROWS_AS(lame_2d_from_3d(1.0, 0.5, 1.0), ConstitutiveError);
  CHECK_THROWS_AS(lame_2d_from_3d(1.0, 0.3, 0.0), ConstitutiveError);
}

TEST_CASE("lambda3 plane stress") {
  CHECK(solve_lambda3(Law3D::CompressibleNH, 2.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(solve_lambda3(Law3D::IncompressibleNH, 0.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(solve_lambda3(Law3D::CompressibleNH, 0.0, 1.0, 1.7) == doctest::Approx(1.0));
  for (int t = 0; t < 50; ++t) {
    const double Lt = uniform(0.1, 5), mt = uniform(0.1, 5), Js = uniform(0.3, 3);
    const double l3 = solve_lambda3(Law3D::CompressibleNH, Lt, mt, Js);
    // dW/dlambda3 of the compressible law
    const double res = 0.25 * Lt * (2 * Js * Js * l3 - 2 / l3) + 0.5 * mt * (2 * l3 - 2 / l3);
    CHECK(std::abs(res) < 1e-10);
  }
  CHECK_THROWS_AS(solve_lambda3(Law3D::CompressibleNH, 1, 1, 0.0), ConstitutiveError);
}

TEST_CASE("zero stress at the reference configuration") {
  for (const auto& law : all_laws()) {
    auto in = random_state();
    if (std::holds_alternative<CanhamNH>(law)) in.B.setZero();  // planar reference only
    in.a = in.A;
    in.b = in.B;
    const auto r = evaluate(law, in);
    INFO(law_name(law));
    CHECK(r.stress.tau.norm() < 1e-12);
    CHECK(r.stress.M0.norm() < 1e-12);
  }
}

TEST_CASE("stress equals energy gradient") {
  for (const auto& law : all_laws()) {
    for (int t = 0; t < 50; ++t) {
      const auto in = random_state();
      const auto r = evaluate(law, in, false);
      StressState fd;
      if (const auto* p = std::get_if<Projected>(&law))
        fd = fd_stress([&](const SurfaceStrainInput& x) { return projected_energy(*p, in, x); }, in, 1e-6);
      else
        fd = fd_stress([&](const SurfaceStrainInput& x) { return strain_energy(law, x); }, in, 1e-6);
      INFO(law_name(law));
      CHECK(rel_err(r.stress.tau, fd.tau) < 1e-5);
      CHECK(rel_err(r.stress.M0, fd.M0) < 1e-5);
    }
  }
}

TEST_CASE("tangents match finite differences of stress") {
  for (const auto& law : all_laws()) {
    for (int t = 0; t < 50; ++t) {
      const auto in = random_state();
      const auto r = evaluate(law, in);
      INFO(law_name(law));
      CHECK(tangent_err(r.tangent, fd_tangent(law, in, 1e-6)) < 1e-4);
    }
  }
  Projected p3{Law3D::CompressibleNH, 1.0, 1.0, 0.1, 3, Reduction::direct};
  for (int t = 0; t < 10; ++t) {
    const auto in = random_state();
    CHECK(tangent_err(evaluate(p3, in).tangent, fd_tangent(p3, in, 1e-6)) < 1e-4);
  }
}

TEST_CASE("tangent symmetries") {
  const auto in = random_state();
  const auto k = evaluate(Koiter{2.0, 1.5, 0.3}, in);
  CHECK(k.tangent.D.norm() == 0.0);
  CHECK(k.tangent.E.norm() == 0.0);
  CHECK((k.tangent.F - 0.09 / 12.0 * k.tangent.C).norm() == 0.0);
  for (const MaterialLaw law : {MaterialLaw{CanhamNH{5.0, 10.0, 1.0}}, MaterialLaw{MixedKoiterNH{2.0, 1.5, 0.1}}}) {
    const auto r = evaluate(law, in);
    CHECK(rel_err(r.tangent.C, r.tangent.C.transpose()) < 1e-12);
    CHECK(rel_err(r.tangent.F, r.tangent.F.transpose()) < 1e-12);
    CHECK(rel_err(r.tangent.E, r.tangent.D.transpose(), 1.0) < 1e-12);
  }
}

TEST_CASE("Canham pure bending moment") {
  const double c = 2.5, k1 = 0.4;
  SurfaceStrainInput in{Mat2::Identity(), Mat2::Zero(), Mat2::Identity(), Mat2::Zero()};
  in.b(0, 0) = k1;
  const auto r = evaluate(CanhamNH{5.0, 10.0, c}, in);
  CHECK(r.stress.M0(0, 0) == doctest::Approx(c * k1));
  CHECK(r.stress.M0(1, 1) == 0.0);
  SurfaceStrainInput bad = in;
  bad.a(1, 1) = -1.0;
  CHECK_THROWS_AS(evaluate(CanhamNH{5.0, 10.0, c}, bad), ConstitutiveError);
}

TEST_CASE("mixed law decouples in-plane stretch") {
  SurfaceStrainInput in{Mat2::Identity(), Mat2::Zero(), Mat2::Identity() * 1.2, Mat2::Zero()};
  const auto r = evaluate(MixedKoiterNH{2.0, 1.5, 0.1}, in);
  const auto n = evaluate(CanhamNH{2.0, 1.5, 0.0}, in);
  CHECK(r.stress.M0.norm() == 0.0);
  CHECK(rel_err(r.stress.tau, n.stress.tau) < 1e-14);
}

TEST_CASE("projected model reduces to Koiter at small strain") {
  const double E = 3.0, nu = 0.3, T = 0.05;
  const auto [Lt, mt] = lame_3d(E, nu);
  const auto [L, m] = lame_2d_from_3d(E, nu, T);
  for (int t = 0; t < 10; ++t) {
    SurfaceStrainInput in;
    in.A = Mat2::Identity() + rand_sym(0.2);
    in.B = Mat2::Zero();
    in.a = in.A + rand_sym(1e-6);
    in.b = rand_sym(1e-6);
    const auto p = evaluate(Projected{Law3D::CompressibleNH, Lt, mt, T, 3, Reduction::metric_weighted}, in);
    const auto k = evaluate(Koiter{L, m, T}, in);
    CHECK(rel_err(p.stress.tau, k.stress.tau) < 1e-3);
    CHECK(rel_err(p.stress.M0, k.stress.M0) < 1e-3);
    CHECK(rel_err(p.tangent.C, k.tangent.C) < 1e-3);
    CHECK(rel_err(p.tangent.F, k.tangent.F) < 1e-3);
  }
}

TEST_CASE("projected model rejects nonpositive shifter") {
  const Mat2 B = Eigen::Vector2d(25.0, -25.0).asDiagonal();
  SurfaceStrainInput in{Mat2::Identity(), B, Mat2::Identity(), B};
  CHECK_THROWS_AS(evaluate(Projected{Law3D::CompressibleNH, 1.0, 1.0, 0.2, 3, Reduction::metric_weighted}, in),
                  ConstitutiveError);
}

TEST_CASE("gauss rules integrate polynomials") {
  for (int n = 1; n <= 10; ++n) {
    const GaussRule g = gauss_legendre(n, 0.0, 2.0);
    double s = 0, w = 0;
    for (int i = 0; i < n; ++i) {
      s += g.w[i] * std::pow(g.x[i], 2 * n - 1);
      w += g.w[i];
    }
    CHECK(w == doctest::Approx(2.0));
    CHECK(s == doctest::Approx(std::pow(2.0, 2 * n) / (2 * n)));
  }
}
