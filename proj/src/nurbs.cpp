#include "klshell/nurbs.hpp"

#include <algorithm>
#include <cmath>

namespace kls {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

int find_span(const KnotVector& kv, double u) {
  const auto& U = kv.knots;
  const int n = kv.n_basis();
  if (u >= U[n]) return n - 1;
  if (u <= U[kv.degree]) return kv.degree;
  auto it = std::upper_bound(U.begin() + kv.degree, U.begin() + n + 1, u);
  return static_cast<int>(it - U.begin()) - 1;
}

// Homogeneous control rows of a patch along direction dir.
std::vector<std::vector<Eigen::Vector4d>> homogeneous_lines(const Patch& p, int dir) {
  std::vector<std::vector<Eigen::Vector4d>> lines;
  const int nl = dir == 0 ? p.nv : p.nu;
  const int nc = dir == 0 ? p.nu : p.nv;
  lines.resize(nl);
  for (int l = 0; l < nl; ++l) {
    lines[l].resize(nc);
    for (int c = 0; c < nc; ++c) {
      const Eigen::Vector4d& q = p.cp[dir == 0 ? p.index(c, l) : p.index(l, c)];
      lines[l][c] << q.head<3>() * q[3], q[3];
    }
  }
  return lines;
}

Patch from_homogeneous_lines(const Patch& tmpl, int dir,
                             const std::vector<std::vector<Eigen::Vector4d>>& lines) {
  Patch out = tmpl;
  const int nc = static_cast<int>(lines.front().size());
  if (dir == 0)
    out.nu = nc;
  else
    out.nv = nc;
  out.cp.assign(static_cast<size_t>(out.nu) * out.nv, Eigen::Vector4d::Zero());
  for (size_t l = 0; l < lines.size(); ++l)
    for (int c = 0; c < nc; ++c) {
      const Eigen::Vector4d& h = lines[l][c];
      Eigen::Vector4d q;
      q << h.head<3>() / h[3], h[3];
      out.cp[dir == 0 ? out.index(c, static_cast<int>(l)) : out.index(static_cast<int>(l), c)] = q;
    }
  return out;
}

std::vector<double> breakpoints(const KnotVector& kv) {
  std::vector<double> b;
  for (int i : kv.span_indices()) b.push_back(kv.knots[i]);
  b.push_back(kv.back());
  return b;
}

// Knots to insert so that the direction ends up with n spans.
std::vector<double> refinement_knots(const KnotVector& kv, int n) {
  const auto b = breakpoints(kv);
  const int m = static_cast<int>(b.size()) - 1;
  if (n < m) throw GeometryError("refine: requested span count below current");
  std::vector<double> ins;
  if (n == m) return ins;
  const double a = b.front(), e = b.back(), tol = 1e-12 * (e - a);
  bool subset = true;
  for (double x : b) {
    const double k = (x - a) / (e - a) * n;
    if (std::abs(k - std::round(k)) * (e - a) / n > tol) subset = false;
  }
  if (subset) {
    for (int k = 1; k < n; ++k) {
      const double x = a + (e - a) * k / n;
      bool present = false;
      for (double y : b) present = present || std::abs(x - y) <= tol;
      if (!present) ins.push_back(x);
    }
    return ins;
  }
  // Nonuniform input: split spans proportionally to their length.
  std::vector<int> cnt(m, 1);
  std::vector<std::pair<double, int>> rem;
  int used = m;
  for (int s = 0; s < m; ++s) {
    const double share = (b[s + 1] - b[s]) / (e - a) * n;
    const int extra = std::max(0, static_cast<int>(std::floor(share)) - 1);
    cnt[s] += extra;
    used += extra;
    rem.emplace_back(share - std::floor(share), s);
  }
  std::sort(rem.begin(), rem.end(), [](auto& x, auto& y) { return x.first > y.first; });
  for (size_t k = 0; used < n; k = (k + 1) % rem.size(), ++used) cnt[rem[k].second]++;
  for (int s = 0; s < m; ++s)
    for (int k = 1; k < cnt[s]; ++k) ins.push_back(b[s] + (b[s + 1] - b[s]) * k / cnt[s]);
  std::sort(ins.begin(), ins.end());
  return ins;
}

}  // namespace

std::vector<int> KnotVector::span_indices() const {
  std::vector<int> s;
  for (int i = degree; i < n_basis(); ++i)
    if (knots[i] < knots[i + 1]) s.push_back(i);
  return s;
}

void KnotVector::validate() const {
  if (degree < 1) throw GeometryError("knot vector: degree must be >= 1");
  const int m = static_cast<int>(knots.size());
  if (m < 2 * (degree + 1)) throw GeometryError("knot vector: too few knots");
  for (int i = 1; i < m; ++i)
    if (knots[i] < knots[i - 1]) throw GeometryError("knot vector: knots not nondecreasing");
  for (int i = 1; i <= degree; ++i)
    if (knots[i] != knots[0] || knots[m - 1 - i] != knots[m - 1])
      throw GeometryError("knot vector: not open/clamped");
  if (!(knots.back() > knots.front())) throw GeometryError("knot vector: empty domain");
  int mult = 1;
  for (int i = degree + 1; i < m - degree - 1; ++i) {
    mult = knots[i] == knots[i - 1] && i > degree + 1 ? mult + 1 : 1;
    if (knots[i] == knots.front()) throw GeometryError("knot vector: end multiplicity exceeds p+1");
    if (mult > degree) throw GeometryError("knot vector: interior multiplicity exceeds degree");
  }
}

KnotVector uniform_knots(int degree, int n_spans, double a, double b) {
  KnotVector kv;
  kv.degree = degree;
  for (int i = 0; i <= degree; ++i) kv.knots.push_back(a);
  for (int k = 1; k < n_spans; ++k) kv.knots.push_back(a + (b - a) * k / n_spans);
  for (int i = 0; i <= degree; ++i) kv.knots.push_back(b);
  return kv;
}

Bernstein1D bernstein_eval(int p, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("bernstein_eval: t outside [0,1]");
  auto value = [&](int deg, int k) -> double {
    if (k < 0 || k > deg) return 0.0;
    return binomial(deg, k) * std::pow(t, k) * std::pow(1.0 - t, deg - k);
  };
  Bernstein1D b;
  b.N.resize(p + 1);
  b.dN.resize(p + 1);
  b.ddN.resize(p + 1);
  for (int k = 0; k <= p; ++k) {
    b.N[k] = value(p, k);
    b.dN[k] = p >= 1 ? p * (value(p - 1, k - 1) - value(p - 1, k)) : 0.0;
    b.ddN[k] = p >= 2 ? p * (p - 1) * (value(p - 2, k - 2) - 2 * value(p - 2, k - 1) + value(p - 2, k))
                      : 0.0;
  }
  return b;
}

std::vector<Eigen::MatrixXd> build_extraction(const KnotVector& kv) {
  kv.validate();
  const int p = kv.degree;
  const int m = static_cast<int>(kv.knots.size());
  auto U = [&](int i) { return kv.knots[i - 1]; };  // 1-based access
  const int ne = kv.n_spans();
  std::vector<Eigen::MatrixXd> C(ne + 1, Eigen::MatrixXd::Identity(p + 1, p + 1));
  std::vector<double> alphas(p + 1, 0.0);
  int a = p + 1, b = a + 1, nb = 0;
  while (b < m) {
    C[nb + 1].setIdentity();
    const int i = b;
    while (b < m && U(b + 1) == U(b)) ++b;
    const int mult = b - i + 1;
    if (mult < p) {
      const double numer = U(b) - U(a);
      for (int j = p; j > mult; --j) alphas[j - mult - 1] = numer / (U(a + j) - U(a));
      const int r = p - mult;
      for (int j = 1; j <= r; ++j) {
        const int save = r - j + 1;
        const int s = mult + j;
        for (int k = p + 1; k >= s + 1; --k) {
          const double alpha = alphas[k - s - 1];
          C[nb].col(k - 1) = alpha * C[nb].col(k - 1) + (1.0 - alpha) * C[nb].col(k - 2);
        }
        if (b < m)
          for (int l = 0; l <= j; ++l) C[nb + 1](save - 1 + l, save - 1) = C[nb](p - j + l, p);
      }
    }
    ++nb;
    if (b < m) {
      a = b;
      ++b;
    }
  }
  C.resize(ne);
  return C;
}

Eigen::VectorXd cox_de_boor(const KnotVector& kv, double u) {
  const auto& U = kv.knots;
  const int p = kv.degree, n = kv.n_basis();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  const int span = find_span(kv, u);
  // Triangular table of the NURBS book, algorithm A2.2.
  std::vector<double> N(p + 1, 0.0), left(p + 1), right(p + 1);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - U[span + 1 - j];
    right[j] = U[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    N[j] = saved;
  }
  for (int j = 0; j <= p; ++j) out[span - p + j] = N[j];
  return out;
}

Side side_from_string(const std::string& s) {
  if (s == "u0") return Side::u0;
  if (s == "u1") return Side::u1;
  if (s == "v0") return Side::v0;
  if (s == "v1") return Side::v1;
  throw GeometryError("unknown side '" + s + "'");
}

std::string to_string(Side s) {
  switch (s) {
    case Side::u0: return "u0";
    case Side::u1: return "u1";
    case Side::v0: return "v0";
    case Side::v1: return "v1";
  }
  return "?";
}

void Patch::validate() const {
  ku.validate();
  kv.validate();
  if (ku.degree < 2 || kv.degree < 2 || ku.degree > 5 || kv.degree > 5)
    throw GeometryError("patch " + id + ": degrees must lie in [2,5]");
  if (ku.n_basis() != nu || kv.n_basis() != nv)
    throw GeometryError("patch " + id + ": control grid does not match knot vectors");
  if (static_cast<int>(cp.size()) != nu * nv)
    throw GeometryError("patch " + id + ": wrong number of control points");
  for (const auto& q : cp)
    if (!(q[3] > 0.0)) throw GeometryError("patch " + id + ": nonpositive weight");
}

Eigen::Vector3d Patch::point(double u, double v) const {
  const Eigen::VectorXd Nu = cox_de_boor(ku, u), Nv = cox_de_boor(kv, v);
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  for (int j = 0; j < nv; ++j) {
    if (Nv[j] == 0.0) continue;
    for (int i = 0; i < nu; ++i) {
      if (Nu[i] == 0.0) continue;
      const Eigen::Vector4d& q = cp[index(i, j)];
      const double c = Nu[i] * Nv[j] * q[3];
      h.head<3>() += c * q.head<3>();
      h[3] += c;
    }
  }
  return h.head<3>() / h[3];
}

std::vector<int> Patch::side_indices(Side s) const {
  std::vector<int> idx;
  switch (s) {
    case Side::u0:
      for (int j = 0; j < nv; ++j) idx.push_back(index(0, j));
      break;
    case Side::u1:
      for (int j = 0; j < nv; ++j) idx.push_back(index(nu - 1, j));
      break;
    case Side::v0:
      for (int i = 0; i < nu; ++i) idx.push_back(index(i, 0));
      break;
    case Side::v1:
      for (int i = 0; i < nu; ++i) idx.push_back(index(i, nv - 1));
      break;
  }
  return idx;
}

std::vector<PatchElement> patch_elements(const Patch& p) {
  std::vector<PatchElement> out;
  const auto su = p.ku.span_indices(), sv = p.kv.span_indices();
  for (size_t b = 0; b < sv.size(); ++b)
    for (size_t a = 0; a < su.size(); ++a) {
      PatchElement e;
      e.eu = static_cast<int>(a);
      e.ev = static_cast<int>(b);
      e.first_u = su[a] - p.ku.degree;
      e.first_v = sv[b] - p.kv.degree;
      e.u0 = p.ku.knots[su[a]];
      e.u1 = p.ku.knots[su[a] + 1];
      e.v0 = p.kv.knots[sv[b]];
      e.v1 = p.kv.knots[sv[b] + 1];
      out.push_back(e);
    }
  return out;
}

PatchBasis::PatchBasis(const Patch& p)
    : patch_(p), elems_(patch_elements(p)), cu_(build_extraction(p.ku)), cv_(build_extraction(p.kv)) {
  nsu_ = static_cast<int>(cu_.size());
  nsv_ = static_cast<int>(cv_.size());
}

std::vector<int> PatchBasis::local_indices(int e) const {
  const auto& el = elems_.at(e);
  const int p = patch_.ku.degree, q = patch_.kv.degree;
  std::vector<int> idx;
  idx.reserve((p + 1) * (q + 1));
  for (int b = 0; b <= q; ++b)
    for (int a = 0; a <= p; ++a) idx.push_back(patch_.index(el.first_u + a, el.first_v + b));
  return idx;
}

int PatchBasis::find_element(double u, double v) const {
  const auto su = patch_.ku.span_indices(), sv = patch_.kv.span_indices();
  auto locate = [](const std::vector<int>& spans, const KnotVector& kv, double x) {
    int k = 0;
    while (k + 1 < static_cast<int>(spans.size()) && x >= kv.knots[spans[k + 1]]) ++k;
    return k;
  };
  const int a = locate(su, patch_.ku, u), b = locate(sv, patch_.kv, v);
  return a + nsu_ * b;
}

BasisEval PatchBasis::eval(int e, double u, double v) const {
  if (e < 0 || e >= static_cast<int>(elems_.size())) throw GeometryError("eval_basis: element id out of range");
  const auto& el = elems_[e];
  const int p = patch_.ku.degree, q = patch_.kv.degree;
  const double hu = el.u1 - el.u0, hv = el.v1 - el.v0;
  const double tu = std::clamp((u - el.u0) / hu, 0.0, 1.0);
  const double tv = std::clamp((v - el.v0) / hv, 0.0, 1.0);
  const Bernstein1D bu = bernstein_eval(p, tu), bv = bernstein_eval(q, tv);
  const Eigen::MatrixXd& Cu = cu_[el.eu];
  const Eigen::MatrixXd& Cv = cv_[el.ev];
  const Eigen::VectorXd Nu = Cu * bu.N, dNu = Cu * bu.dN / hu, ddNu = Cu * bu.ddN / (hu * hu);
  const Eigen::VectorXd Nv = Cv * bv.N, dNv = Cv * bv.dN / hv, ddNv = Cv * bv.ddN / (hv * hv);

  const int n = (p + 1) * (q + 1);
  BasisEval out;
  out.element = e;
  out.xi = Eigen::Vector2d(u, v);
  out.N.resize(n);
  out.dN.resize(n, 2);
  out.ddN.resize(n, 3);

  // Weighted B-spline products and their sums.
  Eigen::VectorXd wN(n);
  Eigen::MatrixXd wdN(n, 2), wddN(n, 3);
  double W = 0;
  Eigen::Vector2d dW = Eigen::Vector2d::Zero();
  Eigen::Vector3d ddW = Eigen::Vector3d::Zero();
  for (int b = 0; b <= q; ++b)
    for (int a = 0; a <= p; ++a) {
      const int A = a + (p + 1) * b;
      const double w = patch_.weight(patch_.index(el.first_u + a, el.first_v + b));
      wN[A] = w * Nu[a] * Nv[b];
      wdN(A, 0) = w * dNu[a] * Nv[b];
      wdN(A, 1) = w * Nu[a] * dNv[b];
      wddN(A, 0) = w * ddNu[a] * Nv[b];
      wddN(A, 1) = w * Nu[a] * ddNv[b];
      wddN(A, 2) = w * dNu[a] * dNv[b];
      W += wN[A];
      dW += wdN.row(A).transpose();
      ddW += wddN.row(A).transpose();
    }
  for (int A = 0; A < n; ++A) {
    const double R = wN[A] / W;
    const double R1 = (wdN(A, 0) - R * dW[0]) / W;
    const double R2 = (wdN(A, 1) - R * dW[1]) / W;
    out.N[A] = R;
    out.dN(A, 0) = R1;
    out.dN(A, 1) = R2;
    out.ddN(A, 0) = (wddN(A, 0) - 2 * R1 * dW[0] - R * ddW[0]) / W;
    out.ddN(A, 1) = (wddN(A, 1) - 2 * R2 * dW[1] - R * ddW[1]) / W;
    out.ddN(A, 2) = (wddN(A, 2) - R1 * dW[1] - R2 * dW[0] - R * ddW[2]) / W;
  }
  return out;
}

Patch insert_knot(const Patch& p, int dir, double knot) {
  const KnotVector& kv = dir == 0 ? p.ku : p.kv;
  const auto& U = kv.knots;
  const int deg = kv.degree;
  if (!(knot > U.front() && knot < U.back())) throw GeometryError("insert_knot: knot outside interior");
  const int k = find_span(kv, knot);
  int s = 0;
  for (double x : U) s += x == knot ? 1 : 0;
  if (s >= deg) throw GeometryError("insert_knot: multiplicity would exceed degree");
  auto lines = homogeneous_lines(p, dir);
  for (auto& P : lines) {
    const int n = static_cast<int>(P.size());
    std::vector<Eigen::Vector4d> Q(n + 1);
    for (int i = 0; i <= k - deg; ++i) Q[i] = P[i];
    for (int i = k - deg + 1; i <= k - s; ++i) {
      const double alpha = (knot - U[i]) / (U[i + deg] - U[i]);
      Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1];
    }
    for (int i = k - s + 1; i <= n; ++i) Q[i] = P[i - 1];
    P = std::move(Q);
  }
  Patch out = from_homogeneous_lines(p, dir, lines);
  KnotVector& nk = dir == 0 ? out.ku : out.kv;
  nk.knots.insert(nk.knots.begin() + k + 1, knot);
  return out;
}

Patch refine(const Patch& p, int n_u, int n_v) {
  Patch out = p;
  for (double x : refinement_knots(p.ku, n_u)) out = insert_knot(out, 0, x);
  for (double x : refinement_knots(p.kv, n_v)) out = insert_knot(out, 1, x);
  return out;
}

Patch elevate_bezier(const Patch& p, int degree_u, int degree_v) {
  if (p.ku.n_spans() != 1 || p.kv.n_spans() != 1) throw GeometryError("elevate_bezier: patch must be a single span");
  Patch out = p;
  for (int dir = 0; dir < 2; ++dir) {
    const int target = dir == 0 ? degree_u : degree_v;
    KnotVector& kv = dir == 0 ? out.ku : out.kv;
    if (target < kv.degree) throw GeometryError("elevate_bezier: target degree below current");
    auto lines = homogeneous_lines(out, dir);
    for (int deg = kv.degree; deg < target; ++deg) {
      for (auto& P : lines) {
        std::vector<Eigen::Vector4d> Q(deg + 2);
        Q[0] = P[0];
        Q[deg + 1] = P[deg];
        for (int i = 1; i <= deg; ++i) {
          const double a = static_cast<double>(i) / (deg + 1);
          Q[i] = a * P[i - 1] + (1.0 - a) * P[i];
        }
        P = std::move(Q);
      }
    }
    const double a = kv.front(), b = kv.back();
    kv = uniform_knots(target, 1, a, b);
    out = from_homogeneous_lines(out, dir, lines);
  }
  return out;
}

Patch make_skew_mesh(const Patch& p, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw GeometryError("make_skew_mesh: r outside [0,1]");
  if (r == 0.0) return p;
  if (p.ku.degree < 2) throw GeometryError("make_skew_mesh: needs degree >= 2 along u");
  const double ua = p.ku.front(), ub = p.ku.back(), va = p.kv.front(), vb = p.kv.back();
  const Eigen::Vector3d O = p.point(ua, va);
  const Eigen::Vector3d eS = p.point(ub, va) - O, eL = p.point(ua, vb) - O;
  // The recipe assumes an affine planar parametrization; check it on a sample grid.
  const double scale = eS.norm() + eL.norm();
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b) {
      const double s = a / 4.0, t = b / 4.0;
      const Eigen::Vector3d x = p.point(ua + s * (ub - ua), va + t * (vb - va));
      if ((x - (O + s * eS + t * eL)).norm() > 1e-10 * scale)
        throw GeometryError("make_skew_mesh: patch is not an affine parallelogram");
    }
  const double S = eS.norm(), L = eL.norm();
  const double dS = 0.5 * r * S;
  const Eigen::Vector3d dirS = eS / S;
  auto map = [&](double s, double t) -> Eigen::Vector3d {
    const double xi = (s - 0.5) * S, eta = (t - 0.5) * L;
    return O + s * eS + t * eL - dirS * (2.0 * dS / L) * eta * (1.0 - 4.0 * xi * xi / (S * S));
  };
  // Single Bezier patch of the target degrees interpolating the polynomial map,
  // then the original knots are inserted.
  const int pu = p.ku.degree, pv = p.kv.degree;
  Eigen::MatrixXd Bu(pu + 1, pu + 1), Bv(pv + 1, pv + 1);
  for (int k = 0; k <= pu; ++k) Bu.row(k) = bernstein_eval(pu, static_cast<double>(k) / pu).N.transpose();
  for (int k = 0; k <= pv; ++k) Bv.row(k) = bernstein_eval(pv, static_cast<double>(k) / pv).N.transpose();
  const Eigen::MatrixXd Iu = Bu.inverse(), Iv = Bv.inverse();
  Patch bez;
  bez.id = p.id;
  bez.ku = uniform_knots(pu, 1, ua, ub);
  bez.kv = uniform_knots(pv, 1, va, vb);
  bez.nu = pu + 1;
  bez.nv = pv + 1;
  bez.cp.assign(bez.nu * bez.nv, Eigen::Vector4d::Zero());
  for (int c = 0; c < 3; ++c) {
    Eigen::MatrixXd F(pu + 1, pv + 1);
    for (int a = 0; a <= pu; ++a)
      for (int b = 0; b <= pv; ++b) F(a, b) = map(static_cast<double>(a) / pu, static_cast<double>(b) / pv)[c];
    const Eigen::MatrixXd P = Iu * F * Iv.transpose();
    for (int a = 0; a <= pu; ++a)
      for (int b = 0; b <= pv; ++b) bez.cp[bez.index(a, b)][c] = P(a, b);
  }
  for (auto& q : bez.cp) q[3] = 1.0;
  Patch out = bez;
  for (size_t i = pu + 1; i + pu + 1 < p.ku.knots.size(); ++i) out = insert_knot(out, 0, p.ku.knots[i]);
  for (size_t i = pv + 1; i + pv + 1 < p.kv.knots.size(); ++i) out = insert_knot(out, 1, p.kv.knots[i]);
  return out;
}

}  // namespace kls
