#pragma once

#include "wavectl/norms.hpp"
#include "wavectl/types.hpp"

namespace wavectl {

inline constexpr double kBlowUpGuard = 1e12;

namespace detail {

template <typename Scalar>
void add_laplacian(const DiscreteSetup<Scalar>& s, const Eigen::Ref<const Vec<Scalar>>& y,
                   Vec<Scalar>& out) {
  const Scalar c = Scalar(1) / (s.dx * s.dx);
  const int n = s.nx;
  out[0] += c * (y[1] - 2 * y[0]);
  for (int i = 1; i + 1 < n; ++i) out[i] += c * (y[i - 1] - 2 * y[i] + y[i + 1]);
  out[n - 1] += c * (y[n - 2] - 2 * y[n - 1]);
}

// Right-hand side of the second-order system at one level: Lap y - A.y + S.
template <typename Scalar>
Vec<Scalar> level_accel(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                        const Field<Scalar>& S, const Field<Scalar>& y, int n) {
  Vec<Scalar> acc = S.col(n) - A.col(n).cwiseProduct(y.col(n));
  add_laplacian<Scalar>(s, y.col(n), acc);
  return acc;
}

}  // namespace detail

template <typename Scalar>
struct WaveSolution {
  Field<Scalar> values;
  StateSlice<Scalar> initial;  ///< state read back at t=0 (equals the data fed in)
  StateSlice<Scalar> final;    ///< state at t=T
};

/// Explicit leapfrog solve of  y_tt - y_xx + A y = S  with Dirichlet
/// boundary and data (position, velocity) at t=0. First step by a
/// second-order Taylor expansion.
///
/// The velocity readouts at t=0 and t=T are centered differences through
/// recurrence-generated ghost levels, so the initial readout reproduces the
/// given velocity exactly and the scheme is exactly time reversible.
template <typename Scalar>
WaveSolution<Scalar> wave_forward(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                                  const Field<Scalar>& S, const StateSlice<Scalar>& init) {
  const int N = s.nt;
  const Scalar dt = s.dt;
  Field<Scalar> y(s.nx, N + 1);
  y.col(0) = init.position;
  y.col(1) = init.position + dt * init.velocity +
             (dt * dt / 2) * detail::level_accel(s, A, S, y, 0);
  for (int n = 1; n < N; ++n) {
    y.col(n + 1) = 2 * y.col(n) - y.col(n - 1) + dt * dt * detail::level_accel(s, A, S, y, n);
    if (!(y.col(n + 1).cwiseAbs().maxCoeff() < Scalar(kBlowUpGuard)))
      throw StabilityError("wave solve exceeded the blow-up guard at level " + std::to_string(n + 1));
  }
  WaveSolution<Scalar> out;
  out.initial.position = y.col(0);
  out.initial.velocity = (y.col(1) - y.col(0)) / dt - (dt / 2) * detail::level_accel(s, A, S, y, 0);
  out.final.position = y.col(N);
  out.final.velocity = (y.col(N) - y.col(N - 1)) / dt + (dt / 2) * detail::level_accel(s, A, S, y, N);
  out.values = std::move(y);
  return out;
}

/// Backward solve with data imposed at t=T, realized as the forward solve on
/// time-reversed coefficients. The operator is invariant under t -> T-t, so
/// the round trip forward/backward is exact up to roundoff.
template <typename Scalar>
WaveSolution<Scalar> wave_backward(const DiscreteSetup<Scalar>& s, const Field<Scalar>& A,
                                   const Field<Scalar>& S, const StateSlice<Scalar>& fin) {
  Field<Scalar> Ar = A.rowwise().reverse();
  Field<Scalar> Sr = S.rowwise().reverse();
  StateSlice<Scalar> start{fin.position, -fin.velocity};
  WaveSolution<Scalar> rev = wave_forward(s, Ar, Sr, start);
  WaveSolution<Scalar> out;
  out.values = rev.values.rowwise().reverse();
  out.final = {rev.initial.position, -rev.initial.velocity};
  out.initial = {rev.final.position, -rev.final.velocity};
  return out;
}

/// Explicit stepping of the full semilinear equation y_tt - y_xx + g(y) = S.
/// Same stencil as wave_forward with the nonlinear term at level n.
template <typename Scalar, typename G>
WaveSolution<Scalar> semilinear_forward(const DiscreteSetup<Scalar>& s, G&& g,
                                        const Field<Scalar>& S, const StateSlice<Scalar>& init) {
  const int N = s.nt;
  const Scalar dt = s.dt;
  Field<Scalar> y(s.nx, N + 1);
  auto accel = [&](int n) {
    Vec<Scalar> acc = S.col(n) - y.col(n).unaryExpr([&](Scalar v) { return g(v); });
    detail::add_laplacian<Scalar>(s, y.col(n), acc);
    return acc;
  };
  y.col(0) = init.position;
  y.col(1) = init.position + dt * init.velocity + (dt * dt / 2) * accel(0);
  for (int n = 1; n < N; ++n) {
    y.col(n + 1) = 2 * y.col(n) - y.col(n - 1) + dt * dt * accel(n);
    if (!(y.col(n + 1).cwiseAbs().maxCoeff() < Scalar(kBlowUpGuard)))
      throw StabilityError("semilinear solve exceeded the blow-up guard at level " + std::to_string(n + 1));
  }
  WaveSolution<Scalar> out;
  out.initial.position = y.col(0);
  out.initial.velocity = (y.col(1) - y.col(0)) / dt - (dt / 2) * accel(0);
  out.final.position = y.col(N);
  out.final.velocity = (y.col(N) - y.col(N - 1)) / dt + (dt / 2) * accel(N);
  out.values = std::move(y);
  return out;
}

/// Velocity profile at a level by centered differences, one-sided second
/// order at the ends. Diagnostic readout for raw trajectories.
template <typename Scalar>
Vec<Scalar> velocity_slice(const DiscreteSetup<Scalar>& s, const Field<Scalar>& y, int level) {
  const Scalar dt = s.dt;
  const int N = s.nt;
  if (level == 0) return (-3 * y.col(0) + 4 * y.col(1) - y.col(2)) / (2 * dt);
  if (level == N) return (3 * y.col(N) - 4 * y.col(N - 1) + y.col(N - 2)) / (2 * dt);
  return (y.col(level + 1) - y.col(level - 1)) / (2 * dt);
}

/// Discrete energy 1/2 ||(y, y_t)||_V^2 at a time level.
template <typename Scalar>
Scalar energy(const DiscreteSetup<Scalar>& s, const Field<Scalar>& y, int level) {
  const Vec<Scalar> v = velocity_slice(s, y, level);
  return (h10_sq(s, Vec<Scalar>(y.col(level))) + s.dx * v.squaredNorm()) / 2;
}

/// The quadratic form conserved exactly by the free leapfrog scheme,
/// attached to the half level n+1/2.
template <typename Scalar>
Scalar conserved_energy(const DiscreteSetup<Scalar>& s, const Field<Scalar>& y, int n) {
  const Scalar dt = s.dt;
  const Vec<Scalar> v = (y.col(n + 1) - y.col(n)) / dt;
  const Vec<Scalar> a = y.col(n);
  const Vec<Scalar> b = y.col(n + 1);
  Scalar grad = a[0] * b[0] + a[s.nx - 1] * b[s.nx - 1];
  for (int i = 0; i + 1 < s.nx; ++i) grad += (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
  return (s.dx * v.squaredNorm() + grad / s.dx) / 2;
}

}  // namespace wavectl
