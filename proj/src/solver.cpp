#include "klshell/solver.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

namespace kls {

Eigen::MatrixX3d reference_positions(const MultiPatchMesh& mesh) {
  Eigen::MatrixX3d X(mesh.n_nodes(), 3);
  for (int i = 0; i < mesh.n_nodes(); ++i) X.row(i) = mesh.reference_positions()[i].transpose();
  return X;
}

void ShellModel::prepare() {
  if (materials.empty()) throw std::invalid_argument("no material given");
  if (materials.size() != 1 && materials.size() != mesh.patches.size())
    throw std::invalid_argument("need one material or one per patch");
  cache = build_element_cache(mesh);
  constraints = ConstraintSet(mesh, constraint_defs);
  for (const DirichletBC& bc : dirichlet)
    for (int n : bc.nodes)
      if (n < 0 || n >= mesh.n_nodes()) throw std::invalid_argument("Dirichlet node out of range");
}

const MaterialLaw& ShellModel::material(int patch) const {
  return materials.size() == 1 ? materials.front() : materials.at(patch);
}

namespace {

struct Partial {
  Eigen::VectorXd f;
  std::vector<Eigen::Triplet<double>> K;
  std::exception_ptr error;
};

void element_range(const ShellModel& m, const Eigen::MatrixX3d& x, bool with_tangent, size_t lo, size_t hi,
                   Partial& out) {
  try {
    for (size_t e = lo; e < hi; ++e) {
      const ElementCache& el = m.cache[e];
      ElementResult res;
      try {
        res = internal_element(el, gather(el.nodes, x), m.material(el.patch), with_tangent);
      } catch (const ConstitutiveError& err) {
        throw ConstitutiveError("element " + std::to_string(el.index) + ": " + err.what());
      } catch (const SingularGeometry& err) {
        throw SingularGeometry("element " + std::to_string(el.index) + ": " + err.what());
      }
      const int n = static_cast<int>(el.nodes.size());
      for (int A = 0; A < n; ++A)
        for (int i = 0; i < 3; ++i) out.f[3 * el.nodes[A] + i] += res.f[3 * A + i];
      if (!with_tangent) continue;
      for (int A = 0; A < n; ++A)
        for (int i = 0; i < 3; ++i)
          for (int B = 0; B < n; ++B)
            for (int j = 0; j < 3; ++j)
              out.K.emplace_back(3 * el.nodes[A] + i, 3 * el.nodes[B] + j, res.K(3 * A + i, 3 * B + j));
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

}  // namespace

GlobalSystem assemble(const ShellModel& model, const Eigen::MatrixX3d& x, const Eigen::VectorXd& q, double lambda,
                      bool with_tangent, bool dead_loads, int threads) {
  const int nx = 3 * model.mesh.n_nodes();
  const int nd = model.n_dofs();
  const size_t ne = model.cache.size();
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(ne)));
  std::vector<Partial> parts(nt);
  for (Partial& p : parts) p.f = Eigen::VectorXd::Zero(nd);
  if (nt == 1) {
    element_range(model, x, with_tangent, 0, ne, parts[0]);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back(element_range, std::cref(model), std::cref(x), with_tangent, ne * t / nt, ne * (t + 1) / nt,
                        std::ref(parts[t]));
    for (auto& th : pool) th.join();
  }
  GlobalSystem sys;
  sys.r = Eigen::VectorXd::Zero(nd);
  std::vector<Eigen::Triplet<double>> trip;
  for (Partial& p : parts) {
    if (p.error) std::rethrow_exception(p.error);
    sys.r += p.f;
    trip.insert(trip.end(), p.K.begin(), p.K.end());
  }
  sys.lm_drift = model.constraints.assemble(model.mesh, x, q, sys.r, with_tangent ? &trip : nullptr);

  const ExternalForce ext = external_forces(model.mesh, model.cache, model.loads, x, with_tangent && !dead_loads,
                                            dead_loads);
  sys.f_ext = Eigen::VectorXd::Zero(nd);
  sys.f_ext.head(nx) = ext.f;
  sys.r -= lambda * sys.f_ext;
  if (with_tangent) {
    for (const auto& t : ext.K) trip.emplace_back(t.row(), t.col(), -lambda * t.value());
    sys.K.resize(nd, nd);
    sys.K.setFromTriplets(trip.begin(), trip.end());
  }
  return sys;
}

double internal_energy(const ShellModel& model, const Eigen::MatrixX3d& x) {
  double W = 0;
  for (const ElementCache& el : model.cache) W += element_energy(el, gather(el.nodes, x), model.material(el.patch));
  return W;
}

DofMap::DofMap(int n_nodes, int n_q, const std::vector<DirichletBC>& bcs)
    : fixed_(3 * n_nodes + n_q, 0), proportional_(3 * n_nodes + n_q, 0), value_(3 * n_nodes + n_q, 0.0) {
  for (const DirichletBC& bc : bcs)
    for (int n : bc.nodes)
      for (int i = 0; i < 3; ++i) {
        if (!bc.fix[i]) continue;
        const int d = 3 * n + i;
        if (fixed_[d] && (value_[d] != bc.displacement[i] || proportional_[d] != bc.proportional))
          throw std::invalid_argument("conflicting prescriptions on node " + std::to_string(n));
        fixed_[d] = 1;
        value_[d] = bc.displacement[i];
        proportional_[d] = bc.proportional;
      }
  for (int d = 0; d < size(); ++d)
    if (!fixed_[d]) free_.push_back(d);
}

namespace {

using Clock = std::chrono::steady_clock;

struct State {
  Eigen::MatrixX3d x;
  Eigen::VectorXd q;
};

Eigen::VectorXd restrict(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  return out;
}

double fixed_norm(const Eigen::VectorXd& v, const DofMap& map) {
  double s = 0;
  for (int d = 0; d < map.size(); ++d)
    if (map.fixed(d)) s += v[d] * v[d];
  return std::sqrt(s);
}

Eigen::SparseMatrix<double> free_block(const Eigen::SparseMatrix<double>& K, const std::vector<int>& pos) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(K.nonZeros());
  for (int c = 0; c < K.outerSize(); ++c) {
    if (pos[c] < 0) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, c); it; ++it)
      if (pos[it.row()] >= 0) t.emplace_back(pos[it.row()], pos[c], it.value());
  }
  int n = 0;
  for (int p : pos) n += p >= 0;
  Eigen::SparseMatrix<double> Kf(n, n);
  Kf.setFromTriplets(t.begin(), t.end());
  return Kf;
}

void apply(State& s, const Eigen::VectorXd& du, const std::vector<int>& free, int nx) {
  for (size_t k = 0; k < free.size(); ++k) {
    const int d = free[k];
    if (d < nx)
      s.x(d / 3, d % 3) += du[k];
    else
      s.q[d - nx] += du[k];
  }
}

struct Attempt {
  bool ok = false;
  int iterations = 0;
  std::vector<double> residuals;
  std::string message;
};

class Newton {
 public:
  Newton(const ShellModel& m, const SolverConfig& c)
      : model_(m), cfg_(c), map_(m.mesh.n_nodes(), m.constraints.n_multipliers(), m.dirichlet),
        X_(reference_positions(m.mesh)), nx_(3 * m.mesh.n_nodes()), pos_(map_.size(), -1) {
    for (int k = 0; k < map_.n_free(); ++k) pos_[map_.free_dofs()[k]] = k;
  }

  const DofMap& map() const { return map_; }
  const Eigen::MatrixX3d& X() const { return X_; }

  void prescribe(State& s, double lambda) const {
    for (int d = 0; d < nx_; ++d)
      if (map_.fixed(d)) s.x(d / 3, d % 3) = X_(d / 3, d % 3) + map_.prescribed(d, lambda);
  }

  bool converged(const GlobalSystem& sys, double lambda, double norm) const {
    const double ref = std::max((lambda * restrict(sys.f_ext, map_.free_dofs())).norm(), fixed_norm(sys.r, map_));
    return norm <= cfg_.tol_rel_residual * ref || norm <= cfg_.tol_abs_residual;
  }

  bool linear_solve(const GlobalSystem& sys, Eigen::VectorXd& du, std::string& msg) const {
    if (map_.n_free() == 0) {
      du.resize(0);
      return true;
    }
    const Eigen::SparseMatrix<double> Kf = free_block(sys.K, pos_);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(Kf);
    if (lu.info() != Eigen::Success) {
      msg = "singular tangent";
      return false;
    }
    du = -lu.solve(restrict(sys.r, map_.free_dofs()));
    if (lu.info() != Eigen::Success || !du.allFinite()) {
      msg = "linear solve failed";
      return false;
    }
    return true;
  }

  Attempt iterate(State& s, double lambda) const {
    Attempt at;
    prescribe(s, lambda);
    try {
      for (int it = 0;; ++it) {
        const GlobalSystem sys = assemble(model_, s.x, s.q, lambda, true, false, cfg_.threads);
        const double norm = restrict(sys.r, map_.free_dofs()).norm();
        at.residuals.push_back(norm);
        if (!std::isfinite(norm)) {
          at.message = "non-finite residual";
          return at;
        }
        if (sys.lm_drift > 0.25 * std::acos(-1.0)) {
          at.message = "constraint angle left the admissible branch";
          return at;
        }
        if (converged(sys, lambda, norm)) {
          at.ok = true;
          at.iterations = it;
          return at;
        }
        if (it == cfg_.max_newton_iter) {
          at.message = "no convergence in " + std::to_string(it) + " iterations";
          return at;
        }
        Eigen::VectorXd du;
        if (!linear_solve(sys, du, at.message)) return at;
        apply(s, du, map_.free_dofs(), nx_);
        if (du.lpNorm<Eigen::Infinity>() <= cfg_.tol_increment * model_.mesh.bbox_diagonal()) {
          at.ok = true;
          at.iterations = it + 1;
          return at;
        }
      }
    } catch (const std::runtime_error& e) {
      at.message = e.what();
      return at;
    }
  }

  Eigen::VectorXd reactions(const State& s, double lambda) const {
    const GlobalSystem sys = assemble(model_, s.x, s.q, lambda, false, false, cfg_.threads);
    Eigen::VectorXd R = Eigen::VectorXd::Zero(nx_);
    for (int d = 0; d < nx_; ++d)
      if (map_.fixed(d)) R[d] = sys.r[d];
    return R;
  }

  const ShellModel& model_;
  const SolverConfig& cfg_;

 private:
  DofMap map_;
  Eigen::MatrixX3d X_;
  int nx_;
  std::vector<int> pos_;
};

}  // namespace

SolveResult newton_solve(const ShellModel& model, const SolverConfig& cfg) {
  if (!(cfg.tol_rel_residual > 0) || !(cfg.tol_abs_residual > 0) || !(cfg.tol_increment > 0)) throw std::invalid_argument("tolerances must be positive");
  if (cfg.n_load_steps < 1) throw std::invalid_argument("need at least one load step");
  const auto t0 = Clock::now();
  const Newton nw(model, cfg);
  const int nx = 3 * model.mesh.n_nodes();
  State s{nw.X(), Eigen::VectorXd::Zero(model.constraints.n_multipliers())};
  SolveResult res;

  if (cfg.linear) {
    res.converged = true;
    try {
      const GlobalSystem sys = assemble(model, s.x, s.q, 0.0, true, true, cfg.threads);
      const std::vector<int>& free = nw.map().free_dofs();
      std::vector<int> pos(nw.map().size(), -1);
      for (size_t k = 0; k < free.size(); ++k) pos[free[k]] = static_cast<int>(k);
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      if (!free.empty()) {
        lu.compute(free_block(sys.K, pos));
        if (lu.info() != Eigen::Success) throw std::runtime_error("singular tangent");
      }
      for (int k = 1; k <= cfg.n_load_steps; ++k) {
        const double lam = static_cast<double>(k) / cfg.n_load_steps;
        Eigen::VectorXd u = Eigen::VectorXd::Zero(sys.r.size());
        for (int d = 0; d < nx; ++d)
          if (nw.map().fixed(d)) u[d] = nw.map().prescribed(d, lam);
        Eigen::VectorXd rl = sys.r - lam * sys.f_ext + sys.K * u;
        StepRecord rec;
        rec.lambda = lam;
        rec.residuals.push_back(restrict(rl, free).norm());
        if (!free.empty()) {
          const Eigen::VectorXd du = -lu.solve(restrict(rl, free));
          if (!du.allFinite()) throw std::runtime_error("linear solve failed");
          for (size_t m = 0; m < free.size(); ++m) u[free[m]] = du[m];
          rl = sys.r - lam * sys.f_ext + sys.K * u;
        }
        rec.converged = true;
        rec.iterations = 1;
        rec.x = nw.X();
        for (int d = 0; d < nx; ++d) rec.x(d / 3, d % 3) += u[d];
        rec.q = u.tail(model.constraints.n_multipliers());
        res.reactions = Eigen::VectorXd::Zero(nx);
        for (int d = 0; d < nx; ++d)
          if (nw.map().fixed(d)) res.reactions[d] = rl[d];
        s = State{rec.x, rec.q};
        res.steps.push_back(std::move(rec));
      }
    } catch (const std::runtime_error& e) {
      res.converged = false;
      res.message = e.what();
    }
  } else {
    double lam = 0;
    State prev = s;
    double prev_dl = 0;
    res.converged = true;
    for (int k = 1; k <= cfg.n_load_steps && res.converged; ++k) {
      const double target = static_cast<double>(k) / cfg.n_load_steps;
      StepRecord rec;
      rec.lambda = target;
      double dl = target - lam;
      while (lam < target - 1e-14) {
        const double step = std::min(dl, target - lam);
        State trial = s;
        if (cfg.extrapolate && prev_dl > 0) {
          trial.x += (step / prev_dl) * (s.x - prev.x);
          trial.q += (step / prev_dl) * (s.q - prev.q);
        }
        Attempt at = nw.iterate(trial, lam + step);
        rec.residuals.insert(rec.residuals.end(), at.residuals.begin(), at.residuals.end());
        if (at.ok) {
          prev = std::move(s);
          prev_dl = step;
          s = std::move(trial);
          lam += step;
          rec.iterations += at.iterations;
          continue;
        }
        if (++rec.cuts > cfg.max_cuts) {
          res.converged = false;
          res.message = "load factor " + std::to_string(lam + step) + ": " + at.message;
          break;
        }
        dl = 0.5 * step;
      }
      rec.converged = lam >= target - 1e-14;
      rec.x = s.x;
      rec.q = s.q;
      res.steps.push_back(std::move(rec));
    }
  }
  res.x = s.x;
  res.q = s.q;
  if (res.converged && !cfg.linear) {
    try {
      res.reactions = nw.reactions(s, 1.0);
    } catch (const std::runtime_error&) {
      res.reactions = Eigen::VectorXd::Zero(nx);
    }
  }
  res.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return res;
}

}  // namespace kls
