#pragma once

#include "wavectl/norms.hpp"
#include "wavectl/types.hpp"
#include "wavectl/wave.hpp"

namespace wavectl {

/// Control problem for the linearized equation z_tt - z_xx + A z = u 1_w + B
/// with data `init` at t=0, driven to `target` at t=T.
template <typename Scalar>
struct LinearControlProblem {
  Field<Scalar> A;
  Field<Scalar> B;
  StateSlice<Scalar> init;
  StateSlice<Scalar> target;
};

template <typename Scalar>
struct CgOptions {
  Scalar tol = Scalar(1e-10);    ///< relative residual in the H norm
  int maxit = 1000;
  bool diagonal_scaling = false;
  bool spectral_filter = false;  ///< drop the top 20% of sine modes of the seed
};

struct CgStats {
  int iters = 0;
  double residual = 0;  ///< final relative residual
};

template <typename Scalar>
struct HumSolution {
  Field<Scalar> control;        ///< supported in omega (zero where the mask is zero)
  Field<Scalar> trajectory;     ///< controlled trajectory, replayed independently
  AdjointSeed<Scalar> seed;
  CgStats cg;
  Scalar final_deviation = 0;   ///< V-norm distance of the replayed final state to target
  Scalar tol_deviation = 0;
  StateSlice<Scalar> achieved;
};

/// Dual functional J of the control problem, evaluated by quadrature:
/// J = 1/2 ||phi||^2_{2,q_T} + (B, phi)_2 - <(z0,z1),(phi0,phi1)>
/// with the pairing <z0,phi1> - (z1,phi0).
template <typename Scalar>
Scalar dual_functional(const DiscreteSetup<Scalar>& s, const LinearControlProblem<Scalar>& prob,
                       const AdjointSeed<Scalar>& seed) {
  const auto phi = wave_forward(s, prob.A, zero_field(s), StateSlice<Scalar>{seed.phi0, seed.phi1});
  const Scalar quadratic = quad_qt_masked(s, phi.values, phi.values) / 2;
  const Scalar source = quad_qt(s, prob.B, phi.values);
  const Scalar pairing =
      slice_dot(s, prob.init.position, seed.phi1) - slice_dot(s, prob.init.velocity, seed.phi0);
  return quadratic + source - pairing;
}

namespace detail {

template <typename Scalar>
Field<Scalar> apply_mask(const DiscreteSetup<Scalar>& s, const Field<Scalar>& f) {
  return s.omega_mask.asDiagonal() * f;
}

// Zero outside the support of the mask; values inside are kept unscaled.
template <typename Scalar>
Field<Scalar> restrict_to_mask(const DiscreteSetup<Scalar>& s, const Field<Scalar>& f) {
  Field<Scalar> out = f;
  for (int i = 0; i < s.nx; ++i)
    if (!(s.omega_mask[i] > Scalar(0))) out.row(i).setZero();
  return out;
}

template <typename Scalar>
AdjointSeed<Scalar> riesz_lift(const DiscreteSetup<Scalar>& s, const AdjointSeed<Scalar>& dual) {
  return {dual.phi0, neg_laplacian_apply(s, dual.phi1)};
}

}  // namespace detail

/// One application of the control Gramian. Solves the adjoint wave equation
/// forward from the seed, feeds the windowed adjoint back as a source of the
/// backward solve with zero final data, and reads the result at t=0.
/// Returned is the dual representation (-d/dt psi(0), psi(0)), paired against
/// a test seed (a0, a1) as dx * [ -d/dt psi(0) . a0 + psi(0) . a1 ]. With the
/// ghost-consistent readouts this pairing equals the q_T quadrature of
/// phi_seed * phi_test exactly, which fixes all signs.
template <typename Scalar>
AdjointSeed<Scalar> gramian_apply(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                                  const AdjointSeed<Scalar>& seed) {
  const auto phi = wave_forward(s, A, zero_field(s), StateSlice<Scalar>{seed.phi0, seed.phi1});
  const Field<Scalar> source = detail::apply_mask(s, phi.values);
  const auto psi = wave_backward(s, A, source, zero_state(s));
  return {-psi.initial.velocity, psi.initial.position};
}

/// Dual pairing of a Gramian output (or right-hand side) with a seed.
template <typename Scalar>
Scalar gramian_pair(const DiscreteSetup<Scalar>& s, const AdjointSeed<Scalar>& dual,
                    const AdjointSeed<Scalar>& seed) {
  return s.dx * (dual.phi0.dot(seed.phi0) + dual.phi1.dot(seed.phi1));
}

/// Drops the top 20% of discrete sine modes of both seed components.
template <typename Scalar>
AdjointSeed<Scalar> spectral_lowpass(const DiscreteSetup<Scalar>& s, const AdjointSeed<Scalar>& seed,
                                     Scalar keep_fraction = Scalar(0.8)) {
  const int n = s.nx;
  const int keep = std::max(1, int(std::floor(double(keep_fraction) * n)));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dst(n, n);
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < n; ++m)
      dst(i, m) = std::sin(Scalar(EIGEN_PI) * Scalar(i + 1) * Scalar(m + 1) / Scalar(n + 1));
  auto filter = [&](const Vec<Scalar>& v) {
    Vec<Scalar> coef = (Scalar(2) / Scalar(n + 1)) * (dst * v);
    coef.tail(n - keep).setZero();
    return Vec<Scalar>(dst * coef);
  };
  return {filter(seed.phi0), filter(seed.phi1)};
}

namespace detail {

// Conjugate gradient on the Riesz-lifted Gramian equation in H = L^2 x H^-1.
template <typename Scalar>
std::pair<AdjointSeed<Scalar>, CgStats> gramian_cg(const DiscreteSetup<Scalar>& s,
                                                   const Field<Scalar>& A,
                                                   const AdjointSeed<Scalar>& rhs_dual,
                                                   const CgOptions<Scalar>& opt) {
  auto op = [&](const AdjointSeed<Scalar>& p) {
    return riesz_lift(s, gramian_apply(s, A, p));
  };
  AdjointSeed<Scalar> x{Vec<Scalar>::Zero(s.nx), Vec<Scalar>::Zero(s.nx)};
  AdjointSeed<Scalar> r = riesz_lift(s, rhs_dual);
  const Scalar norm0 = h_norm(s, r);
  if (!(norm0 > Scalar(0))) return {x, CgStats{0, 0.0}};

  Scalar scale0 = 1, scale1 = 1;
  if (opt.diagonal_scaling) {
    AdjointSeed<Scalar> e0{Vec<Scalar>::Ones(s.nx), Vec<Scalar>::Zero(s.nx)};
    AdjointSeed<Scalar> e1{Vec<Scalar>::Zero(s.nx), Vec<Scalar>::Ones(s.nx)};
    scale0 = std::max(h_inner(s, op(e0), e0) / h_inner(s, e0, e0), Scalar(1e-14));
    scale1 = std::max(h_inner(s, op(e1), e1) / h_inner(s, e1, e1), Scalar(1e-14));
  }
  auto precond = [&](const AdjointSeed<Scalar>& v) {
    return AdjointSeed<Scalar>{v.phi0 / scale0, v.phi1 / scale1};
  };

  AdjointSeed<Scalar> z = precond(r);
  AdjointSeed<Scalar> d = z;
  Scalar rho = h_inner(s, r, z);
  CgStats stats;
  for (int it = 1; it <= opt.maxit; ++it) {
    const AdjointSeed<Scalar> ad = op(d);
    const Scalar curvature = h_inner(s, d, ad);
    if (!(curvature > Scalar(0)))
      throw ConvergenceError("gramian lost positivity in CG (observability failure "
                             "on this grid)");
    const Scalar alpha = rho / curvature;
    x.phi0 += alpha * d.phi0;
    x.phi1 += alpha * d.phi1;
    r.phi0 -= alpha * ad.phi0;
    r.phi1 -= alpha * ad.phi1;
    const Scalar rel = h_norm(s, r) / norm0;
    stats.iters = it;
    stats.residual = double(rel);
    if (rel <= opt.tol) return {x, stats};
    z = precond(r);
    const Scalar rho_next = h_inner(s, r, z);
    const Scalar beta = rho_next / rho;
    rho = rho_next;
    d.phi0 = z.phi0 + beta * d.phi0;
    d.phi1 = z.phi1 + beta * d.phi1;
  }
  throw ConvergenceError("gramian CG did not reach tol " + std::to_string(double(opt.tol)) +
                         " in " + std::to_string(opt.maxit) + " iterations (residual " +
                         std::to_string(stats.residual) + ")");
}

// Right-hand side of the Gramian equation for a terminal deficit d:
// a homogeneous backward solve from d transported to t=0 gives the dual
// coefficients (velocity, -position).
template <typename Scalar>
AdjointSeed<Scalar> deficit_rhs(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                                const StateSlice<Scalar>& deficit) {
  const auto chi = wave_backward(s, A, zero_field(s), deficit);
  return {chi.initial.velocity, -chi.initial.position};
}

}  // namespace detail

/// Minimal-L^2(q_T)-norm control driving `init` to rest at t=T for the
/// linear equation with potential A and source B. Conjugate gradient on the
/// dual (HUM) problem in the H = L^2 x H^-1 inner product; the reported
/// deviation always comes from an independent forward replay of the control.
template <typename Scalar>
HumSolution<Scalar> solve_null_control(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                                       const Field<Scalar>& B, const StateSlice<Scalar>& init,
                                       const CgOptions<Scalar>& opt = {}) {
  detail::check_geometry(s.T, s.omega);
  const auto free_run = wave_forward(s, A, B, init);
  const StateSlice<Scalar> deficit{-free_run.final.position, -free_run.final.velocity};
  auto [seed, stats] = detail::gramian_cg(s, A, detail::deficit_rhs(s, A, deficit), opt);
  if (opt.spectral_filter) seed = spectral_lowpass(s, seed);

  HumSolution<Scalar> sol;
  sol.seed = seed;
  sol.cg = stats;
  const auto phi = wave_forward(s, A, zero_field(s), StateSlice<Scalar>{seed.phi0, seed.phi1});
  sol.control = detail::restrict_to_mask(s, phi.values);

  const Field<Scalar> total_source = detail::apply_mask(s, sol.control) + B;
  const auto replay = wave_forward(s, A, total_source, init);
  sol.trajectory = replay.values;
  sol.achieved = replay.final;
  sol.final_deviation = v_norm(s, StateSlice<Scalar>{replay.final.position, replay.final.velocity});
  sol.tol_deviation = 100 * opt.tol * (1 + v_norm(s, init));
  if (!opt.spectral_filter && !(sol.final_deviation <= sol.tol_deviation))
    throw ConvergenceError("replayed control misses the target: deviation " +
                           std::to_string(double(sol.final_deviation)) + " > " +
                           std::to_string(double(sol.tol_deviation)));
  return sol;
}

/// Exact steering between arbitrary states, reduced to a null control
/// problem: with ytil the uncontrolled solution carrying `target` backward,
/// the difference w = y - ytil needs a null control from init - ytil(0).
template <typename Scalar>
HumSolution<Scalar> steer(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                          const Field<Scalar>& B, const StateSlice<Scalar>& init,
                          const StateSlice<Scalar>& target, const CgOptions<Scalar>& opt = {}) {
  const auto ytil = wave_backward(s, A, B, target);
  const StateSlice<Scalar> winit{init.position - ytil.initial.position,
                                 init.velocity - ytil.initial.velocity};
  HumSolution<Scalar> sol = solve_null_control(s, A, zero_field(s), winit, opt);

  const Field<Scalar> total_source = detail::apply_mask(s, sol.control) + B;
  const auto replay = wave_forward(s, A, total_source, init);
  sol.trajectory = replay.values;
  sol.achieved = replay.final;
  sol.final_deviation = v_norm(s, StateSlice<Scalar>{replay.final.position - target.position,
                                                     replay.final.velocity - target.velocity});
  sol.tol_deviation = 100 * opt.tol * (1 + v_norm(s, init) + v_norm(s, target));
  if (!opt.spectral_filter && !(sol.final_deviation <= sol.tol_deviation))
    throw ConvergenceError("steered control misses the target: deviation " +
                           std::to_string(double(sol.final_deviation)));
  return sol;
}

}  // namespace wavectl
