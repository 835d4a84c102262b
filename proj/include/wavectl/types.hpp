#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace wavectl {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Space-time field sampled at interior nodes and all time levels.
/// Shape is nx rows by (nt+1) columns; column n is the spatial profile at
/// time level n. The Dirichlet values at x=0 and x=1 are implicit zeros.
template <typename Scalar>
using Field = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};
struct ResolutionError : std::runtime_error {
  explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};
struct StabilityError : std::runtime_error {
  explicit StabilityError(const std::string& what) : std::runtime_error(what) {}
};
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

template <typename Scalar>
struct Interval {
  Scalar lo{0};
  Scalar hi{0};
  Scalar length() const { return hi - lo; }
};

/// Uniform space-time grid on (0,1) x (0,T) together with the control
/// window omega. Immutable after construction; safe to share across threads.
template <typename Scalar>
struct DiscreteSetup {
  int nx = 0;                ///< interior node count, dx = 1/(nx+1)
  int nt = 0;                ///< time step count, dt = T/nt
  Scalar T = 0;              ///< time horizon
  Interval<Scalar> omega;    ///< control window (l1, l2)
  Vec<Scalar> omega_mask;    ///< per-node indicator weight of 1_omega
  Scalar dx = 0;
  Scalar dt = 0;
  Scalar cfl = 0;            ///< dt/dx

  Scalar node(int i) const { return Scalar(i + 1) * dx; }
};

namespace detail {

// Covered fraction of the dual cell [x-dx/2, x+dx/2] by (lo, hi).
template <typename Scalar>
Vec<Scalar> make_omega_mask(int nx, Scalar dx, Interval<Scalar> omega) {
  Vec<Scalar> mask(nx);
  for (int i = 0; i < nx; ++i) {
    const Scalar x = Scalar(i + 1) * dx;
    const Scalar a = std::max(omega.lo, x - dx / 2);
    const Scalar b = std::min(omega.hi, x + dx / 2);
    mask[i] = std::max(Scalar(0), b - a) / dx;
  }
  return mask;
}

template <typename Scalar>
void check_geometry(Scalar T, Interval<Scalar> omega) {
  if (!(Scalar(0) <= omega.lo && omega.lo < omega.hi && omega.hi <= Scalar(1)))
    throw GeometryError("control window must satisfy 0 <= l1 < l2 <= 1");
  const Scalar t_min = 2 * std::max(omega.lo, Scalar(1) - omega.hi);
  if (!(T > t_min))
    throw GeometryError("time horizon too short: need T > " + std::to_string(double(t_min)));
}

}  // namespace detail

inline constexpr double kCflMargin = 0.05;  // dt/dx <= 1 - kCflMargin

/// Builds the grid: nt is the smallest step count with dt/dx <= cfl_target.
template <typename Scalar>
DiscreteSetup<Scalar> build_setup(int nx, Scalar T, Interval<Scalar> omega, Scalar cfl_target) {
  if (nx < 4) throw ResolutionError("need at least 4 interior nodes");
  detail::check_geometry(T, omega);
  if (!(cfl_target > Scalar(0) && cfl_target <= Scalar(1) - Scalar(kCflMargin)))
    throw std::invalid_argument("cfl_target must lie in (0, 0.95]");

  DiscreteSetup<Scalar> s;
  s.nx = nx;
  s.T = T;
  s.omega = omega;
  s.dx = Scalar(1) / Scalar(nx + 1);
  s.nt = int(std::ceil(double(T * Scalar(nx + 1) / cfl_target)));
  s.nt = std::max(s.nt, 4);
  s.dt = T / Scalar(s.nt);
  s.cfl = s.dt / s.dx;
  s.omega_mask = detail::make_omega_mask(nx, s.dx, omega);
  return s;
}

/// Same grid with a pinned time step count (used by small dense oracles).
template <typename Scalar>
DiscreteSetup<Scalar> build_setup_with_nt(int nx, Scalar T, Interval<Scalar> omega, int nt) {
  if (nx < 4) throw ResolutionError("need at least 4 interior nodes");
  if (nt < 4) throw ResolutionError("need at least 4 time steps");
  detail::check_geometry(T, omega);
  DiscreteSetup<Scalar> s;
  s.nx = nx;
  s.nt = nt;
  s.T = T;
  s.omega = omega;
  s.dx = Scalar(1) / Scalar(nx + 1);
  s.dt = T / Scalar(nt);
  s.cfl = s.dt / s.dx;
  if (s.cfl > Scalar(1) - Scalar(kCflMargin))
    throw std::invalid_argument("requested nt violates the CFL margin");
  s.omega_mask = detail::make_omega_mask(nx, s.dx, omega);
  return s;
}

/// A state (position, velocity) at one time level; position lives in the
/// discrete H^1_0, velocity in L^2.
template <typename Scalar>
struct StateSlice {
  Vec<Scalar> position;
  Vec<Scalar> velocity;
};

template <typename Scalar>
StateSlice<Scalar> zero_state(const DiscreteSetup<Scalar>& s) {
  return {Vec<Scalar>::Zero(s.nx), Vec<Scalar>::Zero(s.nx)};
}

template <typename Scalar>
Field<Scalar> zero_field(const DiscreteSetup<Scalar>& s) {
  return Field<Scalar>::Zero(s.nx, s.nt + 1);
}

}  // namespace wavectl
