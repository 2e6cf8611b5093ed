#include "klshell/constitutive.hpp"

#include "klshell/quadrature.hpp"

#include <cmath>
#include <sstream>

namespace kls {

namespace {

/// Fourth-order surface tensor t[a][b][c][d].
struct T4 {
  double v[2][2][2][2] = {};
  double& operator()(int a, int b, int c, int d) { return v[a][b][c][d]; }
  double operator()(int a, int b, int c, int d) const { return v[a][b][c][d]; }
  T4& operator+=(const T4& o) {
    for (int i = 0; i < 16; ++i) (&v[0][0][0][0])[i] += (&o.v[0][0][0][0])[i];
    return *this;
  }
  T4 operator*(double s) const {
    T4 r = *this;
    for (int i = 0; i < 16; ++i) (&r.v[0][0][0][0])[i] *= s;
    return r;
  }
  T4 operator+(const T4& o) const {
    T4 r = *this;
    r += o;
    return r;
  }
};

T4 outer(const Mat2& X, const Mat2& Y) {
  T4 t;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) t(a, b, c, d) = X(a, b) * Y(c, d);
  return t;
}

/// 1/2 (X^ac Y^bd + X^ad Y^bc)
T4 sym(const Mat2& X, const Mat2& Y) {
  T4 t;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) t(a, b, c, d) = 0.5 * (X(a, c) * Y(b, d) + X(a, d) * Y(b, c));
  return t;
}

/// sum_ef X^ab_ef Y^ef_cd
T4 contract(const T4& X, const T4& Y) {
  T4 t;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) {
          double s = 0;
          for (int e = 0; e < 2; ++e)
            for (int f = 0; f < 2; ++f) s += X(a, b, e, f) * Y(e, f, c, d);
          t(a, b, c, d) = s;
        }
  return t;
}

Eigen::Matrix3d to_voigt(const T4& t) {
  const int ij[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  Eigen::Matrix3d V;
  for (int I = 0; I < 3; ++I)
    for (int J = 0; J < 3; ++J) V(I, J) = t(ij[I][0], ij[I][1], ij[J][0], ij[J][1]);
  return V;
}

Mat2 raise(const Mat2& ainv, const Mat2& X) { return ainv * X * ainv; }

struct Invariants {
  Mat2 Ainv, ainv, bcon, btil;
  double J, I1, H, kappa;
};

Invariants invariants(const SurfaceStrainInput& in) {
  Invariants v;
  v.Ainv = in.A.inverse();
  v.ainv = in.a.inverse();
  const double detA = in.A.determinant(), deta = in.a.determinant();
  if (!(detA > 0) || !(deta > 0)) throw ConstitutiveError("nonpositive metric determinant");
  v.J = std::sqrt(deta / detA);
  v.I1 = v.Ainv.cwiseProduct(in.a).sum();
  v.bcon = raise(v.ainv, in.b);
  v.H = 0.5 * v.ainv.cwiseProduct(in.b).sum();
  v.kappa = in.b.determinant() / deta;
  v.btil = 2.0 * v.H * v.ainv - v.bcon;
  return v;
}

T4 koiter_c(const Mat2& Ainv, double Lambda, double mu) {
  return outer(Ainv, Ainv) * Lambda + sym(Ainv, Ainv) * (2.0 * mu);
}

/// Neo-Hookean membrane part shared by the Canham and mixed laws.
void nh_membrane(double Lambda, double mu, const Invariants& v, Mat2& tau, T4* c) {
  tau = 0.5 * Lambda * (v.J * v.J - 1.0) * v.ainv + mu * (v.Ainv - v.ainv);
  if (c) {
    const double phi = 0.5 * Lambda * (v.J * v.J - 1.0) - mu;
    *c = outer(v.ainv, v.ainv) * (Lambda * v.J * v.J) + sym(v.ainv, v.ainv) * (-2.0 * phi);
  }
}

}  // namespace

std::pair<double, double> lame_3d(double E, double nu) {
  if (!(E > 0)) throw ConstitutiveError("Young's modulus must be positive");
  if (!(nu > -1.0 && nu < 0.5)) throw ConstitutiveError("Poisson ratio must lie in (-1, 0.5); 0.5 is incompressible");
  return {E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))};
}

std::pair<double, double> lame_2d_from_3d(double E, double nu, double T) {
  if (!(T > 0)) throw ConstitutiveError("thickness must be positive");
  const auto [Lt, mt] = lame_3d(E, nu);
  return {T * 2.0 * Lt * mt / (Lt + 2.0 * mt), T * mt};
}

double solve_lambda3(Law3D law, double Lambda3, double mu3, double Jstar) {
  if (!(Jstar > 0)) throw ConstitutiveError("J* must be positive");
  if (law == Law3D::IncompressibleNH) return 1.0 / Jstar;
  return std::sqrt((Lambda3 + 2.0 * mu3) / (Lambda3 * Jstar * Jstar + 2.0 * mu3));
}

MaterialResponse evaluate_koiter(const Koiter& m, const SurfaceStrainInput& in) {
  MaterialResponse r;
  const Mat2 Ainv = in.A.inverse();
  const Mat2 E = 0.5 * (in.a - in.A), K = in.b - in.B;
  const double k = m.T * m.T / 12.0;
  r.stress.tau = m.Lambda * Ainv.cwiseProduct(E).sum() * Ainv + 2.0 * m.mu * raise(Ainv, E);
  r.stress.M0 = k * (m.Lambda * Ainv.cwiseProduct(K).sum() * Ainv + 2.0 * m.mu * raise(Ainv, K));
  r.tangent.C = to_voigt(koiter_c(Ainv, m.Lambda, m.mu));
  r.tangent.F = k * r.tangent.C;
  return r;
}

MaterialResponse evaluate_canham_nh(const CanhamNH& m, const SurfaceStrainInput& in, bool with_tangent) {
  const Invariants v = invariants(in);
  if (!(v.J > 0)) throw ConstitutiveError("inverted element (J <= 0)");
  const double c = m.c, J = v.J, H = v.H, kap = v.kappa;
  MaterialResponse r;
  Mat2 tau_m;
  T4 c_m;
  nh_membrane(m.Lambda, m.mu, v, tau_m, with_tangent ? &c_m : nullptr);
  r.stress.tau = tau_m + c * J * (2 * H * H + kap) * v.ainv - 4.0 * c * J * H * v.bcon;
  r.stress.M0 = c * J * v.bcon;
  if (!with_tangent) return r;

  const double phi = c * J * (2 * H * H + kap);
  const Mat2 dphi_da = c * J * (H * H - 0.5 * kap) * v.ainv - 2.0 * c * J * H * v.bcon;
  const Mat2 dphi_db = c * J * (4.0 * H * v.ainv - v.bcon);
  const double psi = -4.0 * c * J * H;
  const Mat2 dpsi_da = -2.0 * c * J * H * v.ainv + 2.0 * c * J * v.bcon;
  const Mat2 dpsi_db = -2.0 * c * J * v.ainv;
  const T4 dainv_da = sym(v.ainv, v.ainv) * -1.0;
  const T4 dbcon_da = (sym(v.ainv, v.bcon) + sym(v.bcon, v.ainv)) * -1.0;
  const T4 dbcon_db = sym(v.ainv, v.ainv);

  const T4 dtau_da = outer(v.ainv, dphi_da) + dainv_da * phi + outer(v.bcon, dpsi_da) + dbcon_da * psi;
  const T4 dtau_db = outer(v.ainv, dphi_db) + outer(v.bcon, dpsi_db) + dbcon_db * psi;
  const T4 dM_da = outer(v.bcon, 0.5 * c * J * v.ainv) + dbcon_da * (c * J);
  const T4 dM_db = dbcon_db * (c * J);
  r.tangent.C = to_voigt(c_m + dtau_da * 2.0);
  r.tangent.D = to_voigt(dtau_db);
  r.tangent.E = to_voigt(dM_da * 2.0);
  r.tangent.F = to_voigt(dM_db);
  return r;
}

MaterialResponse evaluate_mixed(const MixedKoiterNH& m, const SurfaceStrainInput& in, bool with_tangent) {
  const Invariants v = invariants(in);
  if (!(v.J > 0)) throw ConstitutiveError("inverted element (J <= 0)");
  MaterialResponse r;
  T4 c_m;
  nh_membrane(m.Lambda, m.mu, v, r.stress.tau, with_tangent ? &c_m : nullptr);
  const double k = m.T * m.T / 12.0;
  const Mat2 K = in.b - in.B;
  r.stress.M0 = k * (m.Lambda * v.Ainv.cwiseProduct(K).sum() * v.Ainv + 2.0 * m.mu * raise(v.Ainv, K));
  if (with_tangent) {
    r.tangent.C = to_voigt(c_m);
    r.tangent.F = k * to_voigt(koiter_c(v.Ainv, m.Lambda, m.mu));
  }
  return r;
}

MaterialResponse evaluate_projected(const Projected& m, const SurfaceStrainInput& in, bool with_tangent) {
  if (m.n_gauss < 1 || m.n_gauss > 10) throw ConstitutiveError("thickness quadrature must use 1..10 points");
  const Invariants v = invariants(in);
  const Mat2 Ainv = v.Ainv;
  const double H0 = 0.5 * Ainv.cwiseProduct(in.B).sum();
  const double k0 = in.B.determinant() / in.A.determinant();
  const double H = v.H, kap = v.kappa;
  const double Lt = m.Lambda3, mt = m.mu3;

  const GaussRule gr = gauss_legendre(m.n_gauss);
  const auto& gx = gr.x;
  const auto& gw = gr.w;

  MaterialResponse r;
  T4 dtau_da, dtau_db, dM_da, dM_db;
  const T4 Isym = sym(Mat2::Identity(), Mat2::Identity());
  for (int q = 0; q < m.n_gauss; ++q) {
    const double xi = 0.5 * m.T * gx[q], w = 0.5 * m.T * gw[q];
    const double s0 = 1.0 - 2.0 * H0 * xi + k0 * xi * xi;
    const double s = 1.0 - 2.0 * H * xi + kap * xi * xi;
    if (!(s0 > 0) || !(s > 0)) {
      std::ostringstream os;
      os << "nonpositive shifter at thickness point " << q << " (xi = " << xi << ")";
      throw ConstitutiveError(os.str());
    }
    const double GA = 1.0 - xi * xi * k0, GB = -2.0 * xi + 2.0 * H0 * xi * xi;
    const double ga = 1.0 - xi * xi * kap, gb = -2.0 * xi + 2.0 * H * xi * xi;
    const Mat2 G = GA * in.A + GB * in.B, g = ga * in.a + gb * in.b;
    const Mat2 Ginv = G.inverse(), ginv = g.inverse();
    const double Js = std::sqrt(g.determinant() / G.determinant());
    double f, fp;
    if (m.law == Law3D::CompressibleNH) {
      const double den = Lt * Js * Js + 2.0 * mt;
      f = -mt * (Lt + 2.0 * mt) / den;
      fp = 2.0 * mt * Lt * Js * (Lt + 2.0 * mt) / (den * den);
    } else {
      f = -mt / (Js * Js);
      fp = 2.0 * mt / (Js * Js * Js);
    }
    const Mat2 tt = mt * Ginv + f * ginv;

    if (m.reduction == Reduction::metric_weighted) {
      r.stress.tau += w * s0 * ga * tt;
      r.stress.M0 += w * s0 * 0.5 * gb * tt;
    } else {
      r.stress.tau += w * tt;
      r.stress.M0 += -w * xi * tt;
    }
    if (!with_tangent) continue;

    const T4 dtt_dg = outer(ginv, ginv) * (0.5 * Js * fp) + sym(ginv, ginv) * (-f);
    const Mat2 dga_da = xi * xi * kap * v.ainv, dga_db = -xi * xi * v.btil;
    const Mat2 dgb_da = -xi * xi * v.bcon, dgb_db = xi * xi * v.ainv;
    const T4 dg_da = Isym * ga + outer(in.a, dga_da) + outer(in.b, dgb_da);
    const T4 dg_db = Isym * gb + outer(in.a, dga_db) + outer(in.b, dgb_db);
    const T4 dtt_da = contract(dtt_dg, dg_da), dtt_db = contract(dtt_dg, dg_db);
    if (m.reduction == Reduction::metric_weighted) {
      dtau_da += (outer(tt, dga_da) + dtt_da * ga) * (w * s0);
      dtau_db += (outer(tt, dga_db) + dtt_db * ga) * (w * s0);
      dM_da += (outer(tt, 0.5 * dgb_da) + dtt_da * (0.5 * gb)) * (w * s0);
      dM_db += (outer(tt, 0.5 * dgb_db) + dtt_db * (0.5 * gb)) * (w * s0);
    } else {
      dtau_da += dtt_da * w;
      dtau_db += dtt_db * w;
      dM_da += dtt_da * (-w * xi);
      dM_db += dtt_db * (-w * xi);
    }
  }
  if (with_tangent) {
    r.tangent.C = to_voigt(dtau_da * 2.0);
    r.tangent.D = to_voigt(dtau_db);
    r.tangent.E = to_voigt(dM_da * 2.0);
    r.tangent.F = to_voigt(dM_db);
  }
  return r;
}

MaterialResponse evaluate(const MaterialLaw& law, const SurfaceStrainInput& in, bool with_tangent) {
  return std::visit(
      [&](const auto& m) -> MaterialResponse {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Koiter>)
          return evaluate_koiter(m, in);
        else if constexpr (std::is_same_v<M, CanhamNH>)
          return evaluate_canham_nh(m, in, with_tangent);
        else if constexpr (std::is_same_v<M, MixedKoiterNH>)
          return evaluate_mixed(m, in, with_tangent);
        else
          return evaluate_projected(m, in, with_tangent);
      },
      law);
}

MaterialResponse evaluate(const MaterialLaw& law, const ReferenceState& ref, const SurfaceState& cur,
                          bool with_tangent) {
  return evaluate(law, SurfaceStrainInput{ref.a_cov, ref.b_cov, cur.a_cov, cur.b_cov}, with_tangent);
}

double strain_energy(const MaterialLaw& law, const SurfaceStrainInput& in) {
  const Mat2 Ainv = in.A.inverse();
  auto koiter_w = [&](double Lambda, double mu, const Mat2& X) {
    const double tr = Ainv.cwiseProduct(X).sum();
    return 0.5 * Lambda * tr * tr + mu * raise(Ainv, X).cwiseProduct(X).sum();
  };
  auto nh_w = [&](double Lambda, double mu, const Invariants& v) {
    const double lnJ = std::log(v.J);
    return 0.25 * Lambda * (v.J * v.J - 1.0 - 2.0 * lnJ) + 0.5 * mu * (v.I1 - 2.0 - 2.0 * lnJ);
  };
  if (const auto* k = std::get_if<Koiter>(&law))
    return koiter_w(k->Lambda, k->mu, 0.5 * (in.a - in.A)) +
           k->T * k->T / 12.0 * koiter_w(k->Lambda, k->mu, in.b - in.B);
  if (const auto* c = std::get_if<CanhamNH>(&law)) {
    const Invariants v = invariants(in);
    return nh_w(c->Lambda, c->mu, v) + c->c * v.J * (2.0 * v.H * v.H - v.kappa);
  }
  if (const auto* x = std::get_if<MixedKoiterNH>(&law)) {
    const Invariants v = invariants(in);
    return nh_w(x->Lambda, x->mu, v) + x->T * x->T / 12.0 * koiter_w(x->Lambda, x->mu, in.b - in.B);
  }
  throw ConstitutiveError("strain_energy: projected model has no closed-form surface energy");
}

std::string law_name(const MaterialLaw& law) {
  switch (law.index()) {
    case 0: return "koiter";
    case 1: return "canham_nh";
    case 2: return "mixed";
    default: {
      const auto& p = std::get<Projected>(law);
      return p.law == Law3D::CompressibleNH ? "projected_nh" : "projected_nh_incompressible";
    }
  }
}

}  // namespace kls
