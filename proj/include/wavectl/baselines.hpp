#pragma once

#include <random>

#include "wavectl/lsq.hpp"

namespace wavectl {

// Returned pairs point at the nonlinearity; temporaries would dangle.
template <typename Scalar>
ControlledPair<Scalar> picard_step(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                                   const Field<Scalar>&, const StateSlice<Scalar>&,
                                   const StateSlice<Scalar>&, const CgOptions<Scalar>&,
                                   CgStats*) = delete;

/// One application of the Picard operator K: the minimal-norm controlled
/// pair of the linear equation with frozen potential ghat(y_prev) and
/// source -g(0).
template <typename Scalar>
ControlledPair<Scalar> picard_step(const DiscreteSetup<Scalar>& s, const Nonlinearity<Scalar>& nl,
                                   const Field<Scalar>& y_prev, const StateSlice<Scalar>& init,
                                   const StateSlice<Scalar>& target, const CgOptions<Scalar>& opt,
                                   CgStats* stats = nullptr) {
  const Field<Scalar> A = eval_hatg(nl, y_prev);
  const Field<Scalar> B = Field<Scalar>::Constant(s.nx, s.nt + 1, -nl.g0);
  HumSolution<Scalar> sol = steer(s, A, B, init, target, opt);
  if (stats) *stats = sol.cg;
  return {std::move(sol.trajectory), std::move(sol.control), init, std::move(sol.achieved), &nl};
}

/// Newton update: the least-squares update with the step forced to 1.
/// Shares the descent subproblem and update path with the main iteration.
template <typename Scalar>
ControlledPair<Scalar> newton_step(const DiscreteSetup<Scalar>& s, const ControlledPair<Scalar>& p,
                                   const SolverConfig<Scalar>& cfg, CgStats* stats = nullptr) {
  const DescentDirection<Scalar> dir = descent_pair(s, p, cfg);
  if (stats) *stats = dir.cg;
  ControlledPair<Scalar> next = p;
  apply_update(next, dir, Scalar(1));
  return next;
}

template <typename Scalar>
ControlledPair<Scalar> variant_step(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                                    const ControlledPair<Scalar>&, const StateSlice<Scalar>&,
                                    const StateSlice<Scalar>&, const CgOptions<Scalar>&,
                                    CgStats*) = delete;

/// Variant update: controlled pair for the linearized equation with
/// potential g'(y_prev) and source g'(y_prev) y_prev - g(y_prev); each
/// iterate is itself a controlled pair of minimal control norm.
template <typename Scalar>
ControlledPair<Scalar> variant_step(const DiscreteSetup<Scalar>& s, const Nonlinearity<Scalar>& nl,
                                    const ControlledPair<Scalar>& prev,
                                    const StateSlice<Scalar>& init,
                                    const StateSlice<Scalar>& target, const CgOptions<Scalar>& opt,
                                    CgStats* stats = nullptr) {
  const Field<Scalar> gp = eval_gprime(nl, prev.y);
  const Field<Scalar> B = gp.cwiseProduct(prev.y) - eval_g(nl, prev.y);
  HumSolution<Scalar> sol = steer(s, gp, B, init, target, opt);
  if (stats) *stats = sol.cg;
  return {std::move(sol.trajectory), std::move(sol.control), init, std::move(sol.achieved), &nl};
}

enum class BaselineStatus { Converged, MaxIter, Diverged };

inline const char* to_string(BaselineStatus st) {
  switch (st) {
    case BaselineStatus::Converged: return "converged";
    case BaselineStatus::MaxIter: return "max_iters";
    case BaselineStatus::Diverged: return "diverged";
  }
  return "unknown";
}

template <typename Scalar>
struct BaselineRun {
  ControlledPair<Scalar> pair;
  std::vector<IterationRecord<Scalar>> records;  ///< dir_norm = sup-norm increment
  BaselineStatus status = BaselineStatus::MaxIter;
  Scalar final_E = 0;
};

namespace detail {

template <typename Scalar, typename Step>
BaselineRun<Scalar> iterate_baseline(const DiscreteSetup<Scalar>& s,
                                     const Nonlinearity<Scalar>& nl, Step&& step,
                                     ControlledPair<Scalar> pair, const SolverConfig<Scalar>& cfg,
                                     const IterationObserver<Scalar>& observer) {
  BaselineRun<Scalar> run;
  Scalar E = error_functional(s, pair);
  const Scalar tol_E = cfg.tol_E_factor * (1 + E);
  run.status = BaselineStatus::MaxIter;
  for (int k = 0; k < cfg.max_iters; ++k) {
    if (E <= tol_E) {
      run.status = BaselineStatus::Converged;
      break;
    }
    IterationRecord<Scalar> rec;
    rec.k = k;
    rec.E = E;
    rec.lambda = 1;
    rec.y_inf = pair.y.cwiseAbs().maxCoeff();
    CgStats stats;
    ControlledPair<Scalar> next;
    try {
      next = step(pair, stats);
    } catch (const StabilityError&) {
      run.status = BaselineStatus::Diverged;
      break;
    }
    rec.dir_norm = (next.y - pair.y).cwiseAbs().maxCoeff();
    rec.cg_iters = stats.iters;
    rec.cg_res = Scalar(stats.residual);
    run.records.push_back(rec);
    pair = std::move(next);
    if (observer) observer(k, pair);
    E = error_functional(s, pair);
    if (!(pair.y.cwiseAbs().maxCoeff() <= cfg.blowup_cap) || !std::isfinite(double(E))) {
      run.status = BaselineStatus::Diverged;
      break;
    }
  }
  if (E <= tol_E) run.status = BaselineStatus::Converged;
  run.final_E = E;
  run.pair = std::move(pair);
  return run;
}

}  // namespace detail

template <typename Scalar>
BaselineRun<Scalar> picard_iterate(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                                   const StateSlice<Scalar>&, const StateSlice<Scalar>&,
                                   const SolverConfig<Scalar>&,
                                   const IterationObserver<Scalar>& = {}) = delete;

/// Picard iterations y_{k+1} = K(y_k) from y_0 = 0, with a divergence guard.
/// Divergence is reported, never damped.
template <typename Scalar>
BaselineRun<Scalar> picard_iterate(const DiscreteSetup<Scalar>& s, const Nonlinearity<Scalar>& nl,
                                   const StateSlice<Scalar>& init, const StateSlice<Scalar>& target,
                                   const SolverConfig<Scalar>& cfg,
                                   const IterationObserver<Scalar>& observer = {}) {
  ControlledPair<Scalar> pair =
      picard_step(s, nl, zero_field(s), init, target, cfg.cg_options());
  auto step = [&](const ControlledPair<Scalar>& p, CgStats& st) {
    return picard_step(s, nl, p.y, init, target, cfg.cg_options(), &st);
  };
  return detail::iterate_baseline(s, nl, step, std::move(pair), cfg, observer);
}

template <typename Scalar>
BaselineRun<Scalar> newton_iterate(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                                   const StateSlice<Scalar>&, const StateSlice<Scalar>&,
                                   const SolverConfig<Scalar>&,
                                   const IterationObserver<Scalar>& = {}) = delete;

template <typename Scalar>
BaselineRun<Scalar> newton_iterate(const DiscreteSetup<Scalar>& s, const Nonlinearity<Scalar>& nl,
                                   const StateSlice<Scalar>& init, const StateSlice<Scalar>& target,
                                   const SolverConfig<Scalar>& cfg,
                                   const IterationObserver<Scalar>& observer = {}) {
  auto step = [&](const ControlledPair<Scalar>& p, CgStats& st) {
    return newton_step(s, p, cfg, &st);
  };
  return detail::iterate_baseline(s, nl, step, make_initial_pair(s, nl, init, target, cfg), cfg,
                                  observer);
}

template <typename Scalar>
BaselineRun<Scalar> variant_iterate(const DiscreteSetup<Scalar>&, Nonlinearity<Scalar>&&,
                                    const StateSlice<Scalar>&, const StateSlice<Scalar>&,
                                    const SolverConfig<Scalar>&,
                                    const IterationObserver<Scalar>& = {}) = delete;

template <typename Scalar>
BaselineRun<Scalar> variant_iterate(const DiscreteSetup<Scalar>& s, const Nonlinearity<Scalar>& nl,
                                    const StateSlice<Scalar>& init, const StateSlice<Scalar>& target,
                                    const SolverConfig<Scalar>& cfg,
                                    const IterationObserver<Scalar>& observer = {}) {
  auto step = [&](const ControlledPair<Scalar>& p, CgStats& st) {
    return variant_step(s, nl, p, init, target, cfg.cg_options(), &st);
  };
  return detail::iterate_baseline(s, nl, step, make_initial_pair(s, nl, init, target, cfg), cfg,
                                  observer);
}

/// Time-constant field built from the first 8 spatial sine modes with
/// uniform coefficients, scaled into the sup-norm ball of radius `radius`.
template <typename Scalar>
Field<Scalar> sample_band_limited(const DiscreteSetup<Scalar>& s, std::mt19937_64& rng,
                                  Scalar radius) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  Vec<Scalar> profile = Vec<Scalar>::Zero(s.nx);
  for (int j = 1; j <= 8; ++j) {
    const Scalar a = Scalar(uni(rng));
    for (int i = 0; i < s.nx; ++i)
      profile[i] += a * std::sin(Scalar(j) * Scalar(EIGEN_PI) * s.node(i));
  }
  const Scalar sup = profile.cwiseAbs().maxCoeff();
  if (sup > Scalar(0)) profile *= radius * Scalar(mag(rng)) / sup;
  return profile.replicate(1, s.nt + 1);
}

template <typename Scalar>
struct ProbeSample {
  Scalar xi_gap;      ///< ||xi2 - xi1||_inf
  Scalar k_gap;       ///< ||K(xi2) - K(xi1)||_inf
  Scalar ratio;       ///< k_gap / xi_gap
  Scalar ghat_gap;    ///< ||ghat(xi2) - ghat(xi1)||_inf
};

template <typename Scalar>
struct ProbeReport {
  Scalar rho_max = 0;
  Scalar slope = 0;  ///< least-squares slope of k_gap against ghat_gap through 0
  std::vector<ProbeSample<Scalar>> samples;
};

/// Samples pairs in the sup-norm ball and measures the Lipschitz behaviour
/// of the Picard operator, regressing the controlled-solution gap against
/// the potential gap.
template <typename Scalar>
ProbeReport<Scalar> contraction_probe(const DiscreteSetup<Scalar>& s,
                                      const Nonlinearity<Scalar>& nl,
                                      const StateSlice<Scalar>& init,
                                      const StateSlice<Scalar>& target, Scalar M_ball, int trials,
                                      unsigned long seed, const CgOptions<Scalar>& opt) {
  std::mt19937_64 rng(seed);
  ProbeReport<Scalar> rep;
  Scalar sxx = 0, sxy = 0;
  for (int t = 0; t < trials; ++t) {
    const Field<Scalar> xi1 = sample_band_limited(s, rng, M_ball);
    const Field<Scalar> xi2 = sample_band_limited(s, rng, M_ball);
    const Scalar xi_gap = (xi2 - xi1).cwiseAbs().maxCoeff();
    if (!(xi_gap > Scalar(0))) continue;
    const auto y1 = picard_step(s, nl, xi1, init, target, opt);
    const auto y2 = picard_step(s, nl, xi2, init, target, opt);
    ProbeSample<Scalar> sample;
    sample.xi_gap = xi_gap;
    sample.k_gap = (y2.y - y1.y).cwiseAbs().maxCoeff();
    sample.ratio = sample.k_gap / xi_gap;
    sample.ghat_gap = (eval_hatg(nl, xi2) - eval_hatg(nl, xi1)).cwiseAbs().maxCoeff();
    rep.rho_max = std::max(rep.rho_max, sample.ratio);
    sxx += sample.ghat_gap * sample.ghat_gap;
    sxy += sample.ghat_gap * sample.k_gap;
    rep.samples.push_back(sample);
  }
  rep.slope = sxx > Scalar(0) ? sxy / sxx : Scalar(0);
  return rep;
}

}  // namespace wavectl
