#pragma once

#include "wavectl/types.hpp"

namespace wavectl {

/// Spatial quadrature weights. Interior nodes own their dual cell of width
/// dx; the first and last node absorb the half cells next to the boundary,
/// so the weights sum to 1 exactly and the rule is exact for affine
/// integrands while staying second order for Dirichlet fields.
template <typename Scalar>
Vec<Scalar> space_weights(const DiscreteSetup<Scalar>& s) {
  Vec<Scalar> w = Vec<Scalar>::Constant(s.nx, s.dx);
  w[0] += s.dx / 2;
  w[s.nx - 1] += s.dx / 2;
  return w;
}

/// Trapezoidal time weights: dt at interior levels, dt/2 at both ends.
template <typename Scalar>
Vec<Scalar> time_weights(const DiscreteSetup<Scalar>& s) {
  Vec<Scalar> w = Vec<Scalar>::Constant(s.nt + 1, s.dt);
  w[0] /= 2;
  w[s.nt] /= 2;
  return w;
}

/// Space-time L^2 inner product over Q_T (trapezoid in time, dual cells in space).
template <typename Scalar>
Scalar quad_qt(const DiscreteSetup<Scalar>& s, const Field<Scalar>& f, const Field<Scalar>& g) {
  const Vec<Scalar> wx = space_weights(s);
  const Vec<Scalar> wt = time_weights(s);
  return (wx.transpose() * f.cwiseProduct(g) * wt).value();
}

/// Same but weighted by the omega mask (the L^2(q_T) inner product).
template <typename Scalar>
Scalar quad_qt_masked(const DiscreteSetup<Scalar>& s, const Field<Scalar>& f, const Field<Scalar>& g) {
  const Vec<Scalar> wx = space_weights(s).cwiseProduct(s.omega_mask);
  const Vec<Scalar> wt = time_weights(s);
  return (wx.transpose() * f.cwiseProduct(g) * wt).value();
}

template <typename Scalar>
struct FieldNorms {
  Scalar l2_QT;
  Scalar l2_qT;
  Scalar linf_QT;
};

template <typename Scalar>
FieldNorms<Scalar> norms(const DiscreteSetup<Scalar>& s, const Field<Scalar>& f) {
  return {std::sqrt(std::max(Scalar(0), quad_qt(s, f, f))),
          std::sqrt(std::max(Scalar(0), quad_qt_masked(s, f, f))),
          f.size() ? f.cwiseAbs().maxCoeff() : Scalar(0)};
}

template <typename Scalar>
Scalar l2_qt_norm(const DiscreteSetup<Scalar>& s, const Field<Scalar>& f) {
  return std::sqrt(std::max(Scalar(0), quad_qt_masked(s, f, f)));
}

// ---- slice norms ---------------------------------------------------------

template <typename Scalar>
Scalar slice_l2(const DiscreteSetup<Scalar>& s, const Vec<Scalar>& v) {
  return std::sqrt(s.dx * v.squaredNorm());
}

template <typename Scalar>
Scalar slice_dot(const DiscreteSetup<Scalar>& s, const Vec<Scalar>& a, const Vec<Scalar>& b) {
  return s.dx * a.dot(b);
}

/// H^1_0 seminorm squared: forward differences including the boundary zeros.
template <typename Scalar>
Scalar h10_sq(const DiscreteSetup<Scalar>& s, const Vec<Scalar>& p) {
  Scalar acc = p[0] * p[0] + p[s.nx - 1] * p[s.nx - 1];
  for (int i = 0; i + 1 < s.nx; ++i) {
    const Scalar d = p[i + 1] - p[i];
    acc += d * d;
  }
  return acc / s.dx;
}

/// V = H^1_0 x L^2 norm of a state.
template <typename Scalar>
Scalar v_norm(const DiscreteSetup<Scalar>& s, const StateSlice<Scalar>& u) {
  return std::sqrt(h10_sq(s, u.position) + s.dx * u.velocity.squaredNorm());
}

// ---- discrete -Laplacian and its inverse ---------------------------------

/// Applies the 3-point -Laplacian with Dirichlet conditions.
template <typename Scalar>
Vec<Scalar> neg_laplacian_apply(const DiscreteSetup<Scalar>& s, const Vec<Scalar>& v) {
  const Scalar c = Scalar(1) / (s.dx * s.dx);
  Vec<Scalar> out(s.nx);
  for (int i = 0; i < s.nx; ++i) {
    Scalar acc = 2 * v[i];
    if (i > 0) acc -= v[i - 1];
    if (i + 1 < s.nx) acc -= v[i + 1];
    out[i] = c * acc;
  }
  return out;
}

/// Solves -Lap z = w (SPD tridiagonal, Thomas algorithm). Realizes the
/// discrete H^{-1} inner product via (u,v)_{H^-1} = ((-Lap)^{-1} u, v)_{L^2}.
template <typename Scalar>
Vec<Scalar> neg_laplacian_solve(const DiscreteSetup<Scalar>& s, const Vec<Scalar>& w) {
  const int n = s.nx;
  const Scalar h2 = s.dx * s.dx;
  Vec<Scalar> diag = Vec<Scalar>::Constant(n, Scalar(2) / h2);
  const Scalar off = Scalar(-1) / h2;
  Vec<Scalar> rhs = w;
  for (int i = 1; i < n; ++i) {
    const Scalar m = off / diag[i - 1];
    diag[i] -= m * off;
    rhs[i] -= m * rhs[i - 1];
  }
  Vec<Scalar> z(n);
  z[n - 1] = rhs[n - 1] / diag[n - 1];
  for (int i = n - 2; i >= 0; --i) z[i] = (rhs[i] - off * z[i + 1]) / diag[i];
  return z;
}

// ---- H = L^2 x H^{-1} -----------------------------------------------------

/// Seed of the adjoint wave equation, an element of H = L^2 x H^{-1}.
/// phi1 is stored through an L^2-regular representative.
template <typename Scalar>
struct AdjointSeed {
  Vec<Scalar> phi0;
  Vec<Scalar> phi1;
};

template <typename Scalar>
Scalar h_inner(const DiscreteSetup<Scalar>& s, const AdjointSeed<Scalar>& a,
               const AdjointSeed<Scalar>& b) {
  return s.dx * (a.phi0.dot(b.phi0) + neg_laplacian_solve(s, a.phi1).dot(b.phi1));
}

template <typename Scalar>
Scalar h_norm(const DiscreteSetup<Scalar>& s, const AdjointSeed<Scalar>& a) {
  return std::sqrt(std::max(Scalar(0), h_inner(s, a, a)));
}

}  // namespace wavectl
