#include "klshell/verify.hpp"

#include "klshell/quadrature.hpp"

#include <cmath>

namespace kls {

namespace {

double uniform(std::mt19937& g, double a, double b) { return std::uniform_real_distribution<double>(a, b)(g); }

Mat2 rand_sym(std::mt19937& g, double s) {
  const double x = uniform(g, -s, s), y = uniform(g, -s, s), z = uniform(g, -s, s);
  Mat2 m;
  m << x, z, z, y;
  return m;
}

SurfaceStrainInput perturbed(SurfaceStrainInput in, int which, int I, double h) {
  Mat2& m = which == 0 ? in.a : in.b;
  const int ij[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  m(ij[I][0], ij[I][1]) += h;
  if (I == 2) m(1, 0) += h;
  return in;
}

/// Thickness energy of the projected model with the shifter and the current curvature
/// invariants frozen at base; its gradient at base equals the reduced stresses.
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

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

}  // namespace

MaterialLaw verification_law(const std::string& name) {
  const auto [L3, mu3] = lame_3d(3.0, 0.3);
  if (name == "koiter") return Koiter{2.0, 1.5, 0.1};
  if (name == "canham_nh") return CanhamNH{5.0, 10.0, 1.0};
  if (name == "mixed") return MixedKoiterNH{2.0, 1.5, 0.1};
  if (name == "projected_nh") return Projected{Law3D::CompressibleNH, L3, mu3, 0.1, 3, Reduction::metric_weighted};
  if (name == "projected_nh_incompressible")
    return Projected{Law3D::IncompressibleNH, 0.0, mu3, 0.1, 4, Reduction::metric_weighted};
  throw std::invalid_argument("unknown material model '" + name + "'");
}

std::vector<std::string> verification_law_names() {
  return {"koiter", "canham_nh", "mixed", "projected_nh", "projected_nh_incompressible"};
}

SurfaceStrainInput random_strain_state(std::mt19937& g, double strain) {
  SurfaceStrainInput in;
  in.A = Mat2::Identity() * uniform(g, 0.8, 1.5) + rand_sym(g, 0.3);
  in.B = rand_sym(g, 0.4);
  in.a = in.A + rand_sym(g, strain);
  in.b = in.B + rand_sym(g, strain);
  return in;
}

MaterialCheck check_material(const MaterialLaw& law, int n_states, unsigned seed) {
  std::mt19937 g(seed);
  MaterialCheck out;
  const double h = 1e-6;
  for (int s = 0; s < n_states; ++s) {
    const SurfaceStrainInput in = random_strain_state(g);
    const MaterialResponse r = evaluate(law, in, true);
    auto energy = [&](const SurfaceStrainInput& x) {
      if (const auto* p = std::get_if<Projected>(&law)) return projected_energy(*p, in, x);
      return strain_energy(law, x);
    };
    Eigen::Vector3d t, m;
    for (int I = 0; I < 3; ++I) {
      const double dWa = (energy(perturbed(in, 0, I, h)) - energy(perturbed(in, 0, I, -h))) / (2 * h);
      const double dWb = (energy(perturbed(in, 1, I, h)) - energy(perturbed(in, 1, I, -h))) / (2 * h);
      t[I] = I < 2 ? 2 * dWa : dWa;
      m[I] = I < 2 ? dWb : 0.5 * dWb;
    }
    out.stress_err = std::max({out.stress_err, rel(voigt(r.stress.tau), t), rel(voigt(r.stress.M0), m)});

    TangentSet fd;
    for (int J = 0; J < 3; ++J) {
      const auto ap = evaluate(law, perturbed(in, 0, J, h), false).stress;
      const auto am = evaluate(law, perturbed(in, 0, J, -h), false).stress;
      const auto bp = evaluate(law, perturbed(in, 1, J, h), false).stress;
      const auto bm = evaluate(law, perturbed(in, 1, J, -h), false).stress;
      const double fa = J < 2 ? 2.0 : 1.0, fb = J < 2 ? 1.0 : 0.5;
      fd.C.col(J) = fa * (voigt(ap.tau) - voigt(am.tau)) / (2 * h);
      fd.E.col(J) = fa * (voigt(ap.M0) - voigt(am.M0)) / (2 * h);
      fd.D.col(J) = fb * (voigt(bp.tau) - voigt(bm.tau)) / (2 * h);
      fd.F.col(J) = fb * (voigt(bp.M0) - voigt(bm.M0)) / (2 * h);
    }
    const TangentSet& a = r.tangent;
    const double scale = std::max({a.C.norm(), a.D.norm(), a.E.norm(), a.F.norm(), 1e-12});
    out.tangent_err = std::max(out.tangent_err, std::max({(a.C - fd.C).norm(), (a.D - fd.D).norm(),
                                                          (a.E - fd.E).norm(), (a.F - fd.F).norm()}) /
                                                    scale);
    ++out.states;
  }
  return out;
}

double element_tangent_error(const ElementCache& el, const NodalPositions& x, const MaterialLaw& law, double h) {
  const ElementResult r = internal_element(el, x, law, true);
  const int n = static_cast<int>(3 * x.rows());
  Eigen::MatrixXd J(n, n);
  for (int A = 0; A < x.rows(); ++A)
    for (int i = 0; i < 3; ++i) {
      NodalPositions p = x, m = x;
      p(A, i) += h;
      m(A, i) -= h;
      J.col(3 * A + i) = (internal_element(el, p, law, false).f - internal_element(el, m, law, false).f) / (2 * h);
    }
  return rel(r.K, J);
}

double global_tangent_error(const ShellModel& model, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q,
                            double lambda, double h) {
  const GlobalSystem sys = assemble(model, x, q, lambda, true);
  const int nx = static_cast<int>(3 * x.rows()), n = nx + static_cast<int>(q.size());
  Eigen::MatrixXd J(n, n);
  for (int d = 0; d < n; ++d) {
    Eigen::MatrixX3d xp = x, xm = x;
    Eigen::VectorXd qp = q, qm = q;
    if (d < nx) {
      xp(d / 3, d % 3) += h;
      xm(d / 3, d % 3) -= h;
    } else {
      qp[d - nx] += h;
      qm[d - nx] -= h;
    }
    J.col(d) = (assemble(model, xp, qp, lambda, false).r - assemble(model, xm, qm, lambda, false).r) / (2 * h);
  }
  return rel(Eigen::MatrixXd(sys.K), J);
}

std::vector<MeshCheck> check_meshes(const MaterialLaw& law, unsigned seed) {
  std::mt19937 g(seed);
  auto jiggle = [&](Eigen::MatrixX3d x, double amp) {
    for (int i = 0; i < x.rows(); ++i)
      for (int k = 0; k < 3; ++k) x(i, k) += uniform(g, -amp, amp);
    return x;
  };
  std::vector<MeshCheck> out;

  MultiPatchMesh cap;
  cap.patches.push_back(refine(make_sphere_patch(2.0, 20.0, 70.0, 0.0, 60.0, 3, 1, 1), 2, 2));
  cap.finalize();
  const auto cap_cache = build_element_cache(cap);
  const Eigen::MatrixX3d xc = jiggle(reference_positions(cap), 0.03);
  double err = 0;
  for (const ElementCache& el : cap_cache) err = std::max(err, element_tangent_error(el, gather(el.nodes, xc), law));
  out.push_back({"hemisphere_cap_elements", err});

  PureBendingSolution sol;
  const PureBendingStrip geo(sol, 1.0, 0.5, 0.5, M_PI / 6);
  ShellModel strip;
  strip.mesh = make_strip_mesh(geo, {0.0, 0.5, 1.0, 1.5}, {0.0, 0.5}, 2, 2, 1);
  strip.materials = {law};
  const Eigen::MatrixX3d xs = jiggle(reference_positions(strip.mesh), 0.02);
  const auto strip_cache = build_element_cache(strip.mesh);
  err = 0;
  for (const ElementCache& el : strip_cache) err = std::max(err, element_tangent_error(el, gather(el.nodes, xs), law));
  out.push_back({"folded_strip_elements", err});

  std::vector<InterfacePair> kinked, smooth;
  classify_interfaces(strip.mesh, kinked, smooth);
  for (const bool lagrange : {false, true}) {
    ShellModel m = strip;
    EdgeConstraint g1, fold;
    g1.kind = ConstraintKind::g1;
    g1.pairs = smooth;
    fold.kind = ConstraintKind::fold;
    fold.pairs = kinked;
    for (EdgeConstraint* c : {&g1, &fold}) {
      c->method.lagrange = lagrange;
      c->method.epsilon = 10.0;
      c->method.interp = LMInterp::N2Q1c;
    }
    m.constraint_defs = {g1, fold};
    BoundaryMoment bm;
    bm.edges = {{2, Side::u1}};
    bm.m = 0.3;
    m.loads.moments = {bm};
    m.prepare();
    Eigen::VectorXd q(m.constraints.n_multipliers());
    for (int i = 0; i < q.size(); ++i) q[i] = uniform(g, -0.5, 0.5);
    out.push_back({lagrange ? "folded_strip_global_lagrange" : "folded_strip_global_penalty",
                   global_tangent_error(m, xs, q, 1.0)});
  }
  return out;
}

}  // namespace kls
