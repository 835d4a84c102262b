#pragma once

#include <chrono>
#include <functional>
#include <vector>

#include "wavectl/hum.hpp"
#include "wavectl/nonlinearity.hpp"
#include "wavectl/norms.hpp"
#include "wavectl/types.hpp"
#include "wavectl/wave.hpp"

namespace wavectl {

/// A candidate controlled pair (y, f): trajectory, control supported in
/// omega, recorded endpoint states, and the nonlinearity it is measured
/// against. Updates along descent directions combine all members linearly.
template <typename Scalar>
struct ControlledPair {
  Field<Scalar> y;
  Field<Scalar> f;
  StateSlice<Scalar> init;
  StateSlice<Scalar> final;
  const Nonlinearity<Scalar>* nl = nullptr;
};

/// Null-controlled solution of the linearized equation driven by the
/// current residual; -(Y, F) is the descent direction.
template <typename Scalar>
struct DescentDirection {
  Field<Scalar> Y;
  Field<Scalar> F;
  StateSlice<Scalar> init;
  StateSlice<Scalar> final;
  CgStats cg;
};

template <typename Scalar>
struct SolverConfig {
  Scalar m = 2;                   ///< line-search cap, m >= 1
  Scalar tol_E_factor = Scalar(1e-16);  ///< stop when E <= tol_E_factor * (1 + E0)
  int max_iters = 50;
  Scalar cg_tol = Scalar(1e-10);
  int cg_maxit = 1000;
  Scalar ls_tol = Scalar(1e-4);
  bool spectral_filter = false;
  bool cg_diagonal_scaling = false;
  Scalar blowup_cap = Scalar(1e8);

  CgOptions<Scalar> cg_options() const {
    return {cg_tol, cg_maxit, cg_diagonal_scaling, spectral_filter};
  }
};

template <typename Scalar>
struct IterationRecord {
  int k = 0;
  Scalar E = 0;
  Scalar lambda = 0;
  Scalar dir_norm = 0;      ///< H-proxy norm of the descent pair
  Scalar y_inf = 0;
  Scalar deriv_err = 0;     ///< |E'.(Y1,F1) - 2E| / max(E, eps)
  int cg_iters = 0;
  Scalar cg_res = 0;
  double wall_time = 0;
  // diagnostics kept out of the CSV schema
  Scalar dir_inf = 0;       ///< ||Y1||_inf
  Scalar gprime_inf = 0;    ///< ||g'(y_k)||_inf
};

enum class SolveStatus { Converged, Stagnated, MaxIter, BlowUp };

inline const char* to_string(SolveStatus st) {
  switch (st) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Stagnated: return "stagnated";
    case SolveStatus::MaxIter: return "max_iters";
    case SolveStatus::BlowUp: return "blow_up";
  }
  return "unknown";
}

// ---- residual and functional ----------------------------------------------

/// Second-order stencil of d_tt - d_xx applied to a trajectory, with the
/// end levels closed through ghost levels built from the recorded endpoint
/// velocities. Linear in (y, init, final), and exactly zero-compatible with
/// the forward solver: a solver trajectory satisfies W y + A y - S = 0 at
/// every level including the ends.
template <typename Scalar>
Field<Scalar> wave_operator(const DiscreteSetup<Scalar>& s, const Field<Scalar>& y,
                            const StateSlice<Scalar>& init, const StateSlice<Scalar>& fin) {
  const int N = s.nt;
  const Scalar dt = s.dt;
  Field<Scalar> W(s.nx, N + 1);
  for (int n = 1; n < N; ++n) {
    Vec<Scalar> acc = Vec<Scalar>::Zero(s.nx);
    detail::add_laplacian<Scalar>(s, y.col(n), acc);
    W.col(n) = (y.col(n + 1) - 2 * y.col(n) + y.col(n - 1)) / (dt * dt) - acc;
  }
  Vec<Scalar> lap0 = Vec<Scalar>::Zero(s.nx);
  detail::add_laplacian<Scalar>(s, y.col(0), lap0);
  W.col(0) = 2 * (y.col(1) - y.col(0) - dt * init.velocity) / (dt * dt) - lap0;
  Vec<Scalar> lapN = Vec<Scalar>::Zero(s.nx);
  detail::add_laplacian<Scalar>(s, y.col(N), lapN);
  W.col(N) = 2 * (y.col(N - 1) - y.col(N) + dt * fin.velocity) / (dt * dt) - lapN;
  return W;
}

/// PDE residual r = y_tt - y_xx + g(y) - f 1_w of a candidate pair,
/// evaluated with the same stencil as the forward solver.
template <typename Scalar>
Field<Scalar> residual(const DiscreteSetup<Scalar>& s, const ControlledPair<Scalar>& p) {
  return wave_operator(s, p.y, p.init, p.final) + eval_g(*p.nl, p.y) -
         detail::apply_mask(s, p.f);
}

/// E = 1/2 ||r||^2_{L^2(Q_T)}.
template <typename Scalar>
Scalar error_functional(const DiscreteSetup<Scalar>& s, const ControlledPair<Scalar>& p) {
  const Field<Scalar> r = residual(s, p);
  return quad_qt(s, r, r) / 2;
}

/// H-proxy norm of a pair-shaped object:
/// ||y||_2^2 + ||(y(0), y_t(0))||_V^2 + ||y_tt - y_xx||_2^2 + ||f||_{2,q_T}^2.
template <typename Scalar>
Scalar h_proxy_norm(const DiscreteSetup<Scalar>& s, const Field<Scalar>& y, const Field<Scalar>& f,
                    const StateSlice<Scalar>& init, const StateSlice<Scalar>& fin) {
  const Field<Scalar> W = wave_operator(s, y, init, fin);
  const Scalar v0 = v_norm(s, init);
  return std::sqrt(quad_qt(s, y, y) + v0 * v0 + quad_qt(s, W, W) +
                   quad_qt_masked(s, f, f));
}

// ---- descent machinery -----------------------------------------------------

/// Minimal-norm null-controlled solution of the linearized equation with
/// potential g'(y) and the current residual as source; member of A_0 up to
/// the subproblem tolerance.
template <typename Scalar>
DescentDirection<Scalar> descent_pair(const DiscreteSetup<Scalar>& s,
                                      const ControlledPair<Scalar>& p,
                                      const SolverConfig<Scalar>& cfg) {
  const Field<Scalar> A = eval_gprime(*p.nl, p.y);
  const Field<Scalar> B = residual(s, p);
  HumSolution<Scalar> sol = solve_null_control(s, A, B, zero_state(s), cfg.cg_options());
  return {std::move(sol.trajectory), std::move(sol.control), zero_state(s),
          std::move(sol.achieved), sol.cg};
}

/// Relative error of the identity E'(y,f).(Y1,F1) = 2E, with the derivative
/// evaluated through the inner-product formula against the linearized
/// operator of the direction.
template <typename Scalar>
Scalar directional_derivative_identity(const DiscreteSetup<Scalar>& s,
                                       const ControlledPair<Scalar>& p,
                                       const DescentDirection<Scalar>& d) {
  const Field<Scalar> r = residual(s, p);
  const Field<Scalar> linop = wave_operator(s, d.Y, d.init, d.final) +
                              eval_gprime(*p.nl, p.y).cwiseProduct(d.Y) -
                              detail::apply_mask(s, d.F);
  const Scalar E = quad_qt(s, r, r) / 2;
  const Scalar derivative = quad_qt(s, r, linop);
  return std::abs(derivative - 2 * E) / std::max(E, Scalar(1e-30));
}

namespace detail {

// E((y,f) - lambda (Y,F)) through the exact expansion
// r_lambda = (1-lambda) r + [g(y - lambda Y) - g(y) + lambda g'(y) Y]:
// only pointwise evaluations of g, no PDE solve.
template <typename Scalar>
class LineObjective {
 public:
  LineObjective(const DiscreteSetup<Scalar>& s, const ControlledPair<Scalar>& p,
                const DescentDirection<Scalar>& d)
      : s_(s), nl_(*p.nl), y_(p.y), Y_(d.Y), r_(residual(s, p)),
        gy_(eval_g(*p.nl, p.y)), gpY_(eval_gprime(*p.nl, p.y).cwiseProduct(d.Y)) {}

  Scalar operator()(Scalar lambda) const {
    Field<Scalar> rl = (1 - lambda) * r_ + (y_ - lambda * Y_).unaryExpr([&](Scalar v) {
      return nl_.g(v);
    }) - gy_ + lambda * gpY_;
    return quad_qt(s_, rl, rl) / 2;
  }

 private:
  const DiscreteSetup<Scalar>& s_;
  const Nonlinearity<Scalar>& nl_;
  const Field<Scalar>& y_;
  const Field<Scalar>& Y_;
  Field<Scalar> r_, gy_, gpY_;
};

}  // namespace detail

/// Step length on [0, m]: a 17-point coarse scan seeds a golden-section
/// refinement, and lambda = 1 is probed explicitly (Newton safeguard).
template <typename Scalar>
Scalar line_search(const DiscreteSetup<Scalar>& s, const ControlledPair<Scalar>& p,
                   const DescentDirection<Scalar>& d, Scalar m, Scalar tol_ls) {
  const detail::LineObjective<Scalar> obj(s, p, d);
  constexpr int kScan = 17;
  Scalar best_l = 0, best_v = std::numeric_limits<Scalar>::infinity();
  int best_i = 0;
  for (int i = 0; i < kScan; ++i) {
    const Scalar l = m * Scalar(i) / Scalar(kScan - 1);
    const Scalar v = obj(l);
    if (v < best_v) {
      best_v = v;
      best_l = l;
      best_i = i;
    }
  }
  Scalar lo = m * Scalar(std::max(0, best_i - 1)) / Scalar(kScan - 1);
  Scalar hi = m * Scalar(std::min(kScan - 1, best_i + 1)) / Scalar(kScan - 1);
  const Scalar gr = (std::sqrt(Scalar(5)) - 1) / 2;
  Scalar x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  Scalar f1 = obj(x1), f2 = obj(x2);
  while (hi - lo > tol_ls) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = obj(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = obj(x2);
    }
  }
  const Scalar mid = (lo + hi) / 2;
  const Scalar fmid = obj(mid);
  if (fmid < best_v) {
    best_v = fmid;
    best_l = mid;
  }
  const Scalar f_one = obj(Scalar(1));
  if (f_one <= best_v) {
    best_v = f_one;
    best_l = 1;
  }
  return best_l > Scalar(0) ? best_l : tol_ls;
}

template <typename Scalar>
void apply_update(ControlledPair<Scalar>& p, const DescentDirection<Scalar>& d, Scalar lambda) {
  p.y -= lambda * d.Y;
  p.f -= lambda * d.F;
  p.init.position -= lambda * d.init.position;
  p.init.velocity -= lambda * d.init.velocity;
  p.final.position -= lambda * d.final.position;
  p.final.velocity -= lambda * d.final.velocity;
}

/// Initialization: the minimal-norm controlled pair of the linear problem
/// (g = 0), steered from init to target.
template <typename Scalar>
ControlledPair<Scalar> make_initial_pair(const DiscreteSetup<Scalar>& s,
                                         const Nonlinearity<Scalar>& nl,
                                         const StateSlice<Scalar>& init,
                                         const StateSlice<Scalar>& target,
                                         const SolverConfig<Scalar>& cfg) {
  HumSolution<Scalar> sol = steer(s, zero_field(s), zero_field(s), init, target, cfg.cg_options());
  return {std::move(sol.trajectory), std::move(sol.control), init, std::move(sol.achieved), &nl};
}

// The pair keeps a pointer to the nonlinearity; a temporary would dangle.
template <typename Scalar>
ControlledPair<Scalar> make_initial_pair(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                                         const StateSlice<Scalar>&, const StateSlice<Scalar>&,
                                         const SolverConfig<Scalar>&) = delete;

template <typename Scalar>
struct SolveResult {
  ControlledPair<Scalar> pair;
  std::vector<IterationRecord<Scalar>> records;
  SolveStatus status = SolveStatus::Converged;
  Scalar E0 = 0;
  Scalar final_E = 0;
  Scalar tol_E = 0;
  Scalar replay_deviation = -1;  ///< -1 when not applicable
  Scalar tol_deviation = 0;
  Scalar M_obs = 0;              ///< max over iterations of ||y_k||_inf
  std::vector<std::string> warnings;
};

/// Called after every completed iteration with the updated pair.
template <typename Scalar>
using IterationObserver = std::function<void(int k, const ControlledPair<Scalar>&)>;

template <typename Scalar>
SolveResult<Scalar> solve(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                          const StateSlice<Scalar>&, const StateSlice<Scalar>&,
                          const SolverConfig<Scalar>& = {},
                          const IterationObserver<Scalar>& = {}) = delete;

/// The damped-Newton least-squares iteration: at each step the minimal-norm
/// null-controlled solution of the linearized equation gives a direction
/// along which the derivative of E equals 2E, and a bounded line search
/// picks the step. E decreases strictly until the fixed-grid floor.
template <typename Scalar>
SolveResult<Scalar> solve(const DiscreteSetup<Scalar>& s, const Nonlinearity<Scalar>& nl,
                          const StateSlice<Scalar>& init, const StateSlice<Scalar>& target,
                          const SolverConfig<Scalar>& cfg = {},
                          const IterationObserver<Scalar>& observer = {}) {
  using clock = std::chrono::steady_clock;
  SolveResult<Scalar> res;
  res.pair = make_initial_pair(s, nl, init, target, cfg);
  res.E0 = error_functional(s, res.pair);
  res.tol_E = cfg.tol_E_factor * (1 + res.E0);
  res.tol_deviation = 100 * cfg.cg_tol * (1 + v_norm(s, init) + v_norm(s, target));

  if (nl.growth_beta >= threshold_beta0(nl.s, Scalar(1))) {
    res.warnings.push_back("growth beta " + std::to_string(double(nl.growth_beta)) +
                           " is not below the threshold beta0(s) at C=1; "
                           "convergence is not predicted");
  }

  Scalar E = res.E0;
  res.status = SolveStatus::MaxIter;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const Scalar y_inf = res.pair.y.size() ? res.pair.y.cwiseAbs().maxCoeff() : Scalar(0);
    res.M_obs = std::max(res.M_obs, y_inf);
    if (y_inf > cfg.blowup_cap) {
      res.status = SolveStatus::BlowUp;
      break;
    }
    if (E <= res.tol_E) {
      res.status = SolveStatus::Converged;
      break;
    }
    const auto t0 = clock::now();
    DescentDirection<Scalar> dir;
    try {
      dir = descent_pair(s, res.pair, cfg);
    } catch (const StabilityError&) {
      res.status = SolveStatus::BlowUp;
      break;
    }
    IterationRecord<Scalar> rec;
    rec.k = k;
    rec.E = E;
    rec.y_inf = y_inf;
    rec.deriv_err = directional_derivative_identity(s, res.pair, dir);
    rec.lambda = line_search(s, res.pair, dir, cfg.m, cfg.ls_tol);
    rec.dir_norm = h_proxy_norm(s, dir.Y, dir.F, dir.init, dir.final);
    rec.dir_inf = dir.Y.size() ? dir.Y.cwiseAbs().maxCoeff() : Scalar(0);
    rec.gprime_inf = eval_gprime(*res.pair.nl, res.pair.y).cwiseAbs().maxCoeff();
    rec.cg_iters = dir.cg.iters;
    rec.cg_res = Scalar(dir.cg.residual);

    ControlledPair<Scalar> trial = res.pair;
    apply_update(trial, dir, rec.lambda);
    const Scalar E_next = error_functional(s, trial);
    rec.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    res.records.push_back(rec);
    if (!(E_next < E)) {
      res.status = SolveStatus::Stagnated;
      break;
    }
    res.pair = std::move(trial);
    E = E_next;
    if (observer) observer(k, res.pair);
    if (E <= res.tol_E) {
      res.status = SolveStatus::Converged;
    }
  }
  if (E <= res.tol_E) res.status = SolveStatus::Converged;
  res.final_E = E;

  if (res.status == SolveStatus::Converged) {
    const Field<Scalar> source = detail::apply_mask(s, res.pair.f);
    try {
      const auto replay = semilinear_forward(s, nl.g, source, init);
      res.replay_deviation =
          v_norm(s, StateSlice<Scalar>{replay.final.position - target.position,
                                       replay.final.velocity - target.velocity});
    } catch (const StabilityError&) {
      res.replay_deviation = -1;
    }
  }
  return res;
}

/// Sampled lower bound on the dual norm sup |E'(y,f).(Y,F)| / ||(Y,F)||_H
/// over directions in A_0. The exact sup is not computable; the bound comes
/// from the canonical descent direction plus null-controlled responses to
/// random windowed sources. Reported as a diagnostic, never asserted
/// two-sided.
template <typename Scalar>
Scalar dual_norm_lower_bound(const DiscreteSetup<Scalar>& s, const ControlledPair<Scalar>& p,
                             const SolverConfig<Scalar>& cfg, int samples = 5,
                             unsigned long seed = 2718) {
  const Field<Scalar> r = residual(s, p);
  const Field<Scalar> gp = eval_gprime(*p.nl, p.y);
  auto rate = [&](const Field<Scalar>& Y, const Field<Scalar>& F, const StateSlice<Scalar>& i0,
                  const StateSlice<Scalar>& iT) {
    const Field<Scalar> linop = wave_operator(s, Y, i0, iT) + gp.cwiseProduct(Y) -
                                detail::apply_mask(s, F);
    const Scalar norm = h_proxy_norm(s, Y, F, i0, iT);
    return norm > Scalar(0) ? std::abs(quad_qt(s, r, linop)) / norm : Scalar(0);
  };

  const DescentDirection<Scalar> dir = descent_pair(s, p, cfg);
  Scalar best = rate(dir.Y, dir.F, dir.init, dir.final);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < samples; ++t) {
    Field<Scalar> src(s.nx, s.nt + 1);
    for (int n = 0; n <= s.nt; ++n)
      for (int i = 0; i < s.nx; ++i) src(i, n) = Scalar(uni(rng));
    const HumSolution<Scalar> sol =
        solve_null_control(s, gp, src, zero_state(s), cfg.cg_options());
    best = std::max(best, rate(sol.trajectory, sol.control, zero_state(s), sol.achieved));
  }
  return best;
}

// ---- convergence diagnostics ----------------------------------------------

/// Per-step order estimates p_k = ln(e_{k+1}/e_k) / ln(e_k/e_{k-1}) on
/// e_k = sqrt(E_k), over the contiguous prefix above the fixed-grid floor:
/// entries with E_k <= 1000 * floor are discarded, floor = max(1e-24, final E).
template <typename Scalar>
std::vector<Scalar> convergence_order(const std::vector<Scalar>& E_seq) {
  std::vector<Scalar> orders;
  if (E_seq.size() < 4) return orders;
  const Scalar floor_E = std::max(Scalar(1e-24), E_seq.back());
  std::vector<Scalar> e;
  for (const Scalar E : E_seq) {
    if (!(E > 1000 * floor_E)) break;
    e.push_back(std::sqrt(E));
  }
  for (size_t k = 1; k + 1 < e.size(); ++k) {
    const Scalar num = std::log(e[k + 1] / e[k]);
    const Scalar den = std::log(e[k] / e[k - 1]);
    if (den != Scalar(0)) orders.push_back(num / den);
  }
  return orders;
}

/// Smallest C such that both ||Y1_k||_inf and ||(Y1_k, F1_k)||_H are bounded
/// by C exp(C sqrt(||g'(y_k)||_inf)) sqrt(E_k) across the run (bisection).
template <typename Scalar>
Scalar calibrate_empirical_constant(const std::vector<IterationRecord<Scalar>>& records) {
  auto holds = [&](Scalar C) {
    for (const auto& r : records) {
      const Scalar cap = C * std::exp(C * std::sqrt(r.gprime_inf)) * std::sqrt(r.E);
      if (std::max(r.dir_inf, r.dir_norm) > cap) return false;
    }
    return true;
  };
  Scalar hi = 1;
  while (!holds(hi) && hi < Scalar(1e12)) hi *= 2;
  Scalar lo = 0;
  for (int i = 0; i < 200; ++i) {
    const Scalar mid = (lo + hi) / 2;
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

template <typename Scalar>
struct DecayRow {
  int k;
  Scalar E, E_next;
  Scalar K;             ///< per-step contraction factor from the calibrated constant
  Scalar bound;         ///< min over [0,m] of (|1-l| + l^{1+s} K E^{s/2})^2 E
  bool holds;
  Scalar lambda_tilde;  ///< predicted minimizer of the majorant
  Scalar lambda_measured;
};

template <typename Scalar>
struct DecayReport {
  Scalar C_emp = 0;
  Scalar c = 0;  ///< sup over the run of the per-step factors K_k
  bool all_hold = true;
  std::vector<DecayRow<Scalar>> rows;
};

namespace detail {

// Minimizer of e(l) = |1-l| + l^{1+s} kappa over [0,m] and its value.
template <typename Scalar>
std::pair<Scalar, Scalar> majorant_min(Scalar kappa, Scalar s, Scalar m) {
  if (kappa <= Scalar(0)) return {Scalar(1), Scalar(0)};
  if (s == Scalar(0)) {
    if (kappa < 1) return {Scalar(1), kappa};
    return {Scalar(0), Scalar(1)};
  }
  if ((1 + s) * kappa < Scalar(1)) return {Scalar(1), kappa};
  const Scalar lstar = std::min(m, std::pow((1 + s) * kappa, -1 / s));
  return {lstar, 1 - lstar * s / (1 + s)};
}

}  // namespace detail

/// Checks the measured decay E_{k+1} <= min_l (|1-l| + l^{1+s} K_k E_k^{s/2})^2 E_k
/// against the per-step factors built from the self-calibrated constant, and
/// reports the predicted step lengths alongside the measured ones.
template <typename Scalar>
DecayReport<Scalar> decay_bound_check(const DiscreteSetup<Scalar>& s,
                                      const std::vector<IterationRecord<Scalar>>& records,
                                      Scalar final_E, const Nonlinearity<Scalar>& nl, Scalar m) {
  DecayReport<Scalar> rep;
  if (records.empty()) return rep;
  rep.C_emp = calibrate_empirical_constant(records);
  const Scalar seminorm = (nl.s == Scalar(0)) ? 2 * nl.growth_alpha : nl.holder_seminorm;
  const Scalar qt_measure = s.T;  // quadrature weights sum to T exactly
  for (size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    const Scalar E_next = (k + 1 < records.size()) ? records[k + 1].E : final_E;
    DecayRow<Scalar> row;
    row.k = r.k;
    row.E = r.E;
    row.E_next = E_next;
    row.K = seminorm * std::sqrt(qt_measure / 2) *
            std::pow(rep.C_emp * std::exp(rep.C_emp * std::sqrt(r.gprime_inf)), 1 + nl.s);
    rep.c = std::max(rep.c, row.K);
    const Scalar kappa = row.K * std::pow(r.E, nl.s / 2);
    const auto [lt, emin] = detail::majorant_min(kappa, nl.s, m);
    row.lambda_tilde = lt;
    row.bound = emin * emin * r.E;
    row.lambda_measured = r.lambda;
    row.holds = E_next <= row.bound * (1 + Scalar(1e-9)) + Scalar(1e-300);
    rep.all_hold = rep.all_hold && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace wavectl
