#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "wavectl/types.hpp"

namespace wavectl {

/// Scalar nonlinearity g together with its derivative and the growth data
/// used by the convergence predictions: the Holder exponent s of g', the
/// seminorm [g']_s, and (alpha, beta) with |g'(x)| <= alpha + beta ln^2(1+|x|).
template <typename Scalar>
struct Nonlinearity {
  std::string name = "zero";
  std::function<Scalar(Scalar)> g = [](Scalar) { return Scalar(0); };
  std::function<Scalar(Scalar)> gprime = [](Scalar) { return Scalar(0); };
  Scalar g0 = 0;                 ///< g(0)
  Scalar s = 1;                  ///< Holder exponent of g' in [0,1]
  Scalar holder_seminorm = 0;    ///< [g']_s (declared, or estimated lower bound)
  Scalar growth_alpha = 0;
  Scalar growth_beta = 0;

  Scalar operator()(Scalar x) const { return g(x); }
};

template <typename Scalar = double>
Nonlinearity<Scalar> nl_zero() {
  return {};
}

template <typename Scalar = double>
Nonlinearity<Scalar> nl_linear(Scalar b) {
  Nonlinearity<Scalar> n;
  n.name = "linear";
  n.g = [b](Scalar x) { return b * x; };
  n.gprime = [b](Scalar) { return b; };
  n.s = 1;
  n.holder_seminorm = 0;
  n.growth_alpha = std::abs(b);
  return n;
}

template <typename Scalar = double>
Nonlinearity<Scalar> nl_sine(Scalar a) {
  Nonlinearity<Scalar> n;
  n.name = "sine";
  n.g = [a](Scalar x) { return a * std::sin(x); };
  n.gprime = [a](Scalar x) { return a * std::cos(x); };
  n.s = 1;
  n.holder_seminorm = std::abs(a);  // [g']_1 = ||g''||_inf
  n.growth_alpha = std::abs(a);
  return n;
}

/// Near-critical growth family g(x) = bhat * x * ln^2(1+|x|).
/// |g'| <= bhat + 2*bhat*ln^2(1+|x|) holds on all of R (the margin is
/// bhat*(ln(1+|x|)-1)^2), and sup|g''| ~= 1.5422*bhat.
template <typename Scalar = double>
Nonlinearity<Scalar> nl_logsq(Scalar bhat) {
  Nonlinearity<Scalar> n;
  n.name = "logsq";
  n.g = [bhat](Scalar x) {
    const Scalar L = std::log1p(std::abs(x));
    return bhat * x * L * L;
  };
  n.gprime = [bhat](Scalar x) {
    const Scalar u = std::abs(x);
    const Scalar L = std::log1p(u);
    return bhat * (L * L + 2 * u * L / (1 + u));
  };
  n.s = 1;
  n.holder_seminorm = Scalar(1.5422) * std::abs(bhat);
  n.growth_alpha = std::abs(bhat);
  n.growth_beta = 2 * std::abs(bhat);
  return n;
}

template <typename Scalar>
Field<Scalar> eval_g(const Nonlinearity<Scalar>& nl, const Field<Scalar>& f) {
  return f.unaryExpr([&](Scalar x) { return nl.g(x); });
}

template <typename Scalar>
Field<Scalar> eval_gprime(const Nonlinearity<Scalar>& nl, const Field<Scalar>& f) {
  return f.unaryExpr([&](Scalar x) { return nl.gprime(x); });
}

/// The divided difference ghat(x) = (g(x)-g(0))/x extended continuously
/// through 0. Near zero a Taylor fallback with a symmetric-difference
/// curvature estimate avoids the cancellation in the quotient.
template <typename Scalar>
Scalar hatg(const Nonlinearity<Scalar>& nl, Scalar x) {
  const Scalar window = Scalar(1e-8);
  if (std::abs(x) >= window) return (nl.g(x) - nl.g0) / x;
  const Scalar h = Scalar(1e-4);
  const Scalar curv = (nl.g(h) - 2 * nl.g0 + nl.g(-h)) / (h * h);
  return nl.gprime(Scalar(0)) + curv * x / 2;
}

template <typename Scalar>
Field<Scalar> eval_hatg(const Nonlinearity<Scalar>& nl, const Field<Scalar>& f) {
  return f.unaryExpr([&](Scalar x) { return hatg(nl, x); });
}

/// Sampled lower bound for [g']_s over a range: the max quotient over
/// consecutive sorted sample pairs plus randomly drawn pairs.
template <typename Scalar>
Scalar estimate_holder_seminorm(const Nonlinearity<Scalar>& nl, Interval<Scalar> range, Scalar s,
                                int samples, unsigned long seed = 12345) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(double(range.lo), double(range.hi));
  std::vector<Scalar> pts(samples);
  for (auto& p : pts) p = Scalar(uni(rng));
  std::sort(pts.begin(), pts.end());
  Scalar best = 0;
  auto quotient = [&](Scalar a, Scalar b) {
    if (a == b) return Scalar(0);
    return std::abs(nl.gprime(a) - nl.gprime(b)) / std::pow(std::abs(a - b), s);
  };
  for (int i = 0; i + 1 < samples; ++i) best = std::max(best, quotient(pts[i], pts[i + 1]));
  for (int i = 0; i < samples; ++i)
    best = std::max(best, quotient(Scalar(uni(rng)), Scalar(uni(rng))));
  return best;
}

/// Growth threshold beta0(s) = s^2 / (C^2 (2s+1)^2); beta0(0) = 0 by the
/// s=0 agreement. Satisfies (2 + 1/s) C sqrt(beta0(s)) = 1.
template <typename Scalar>
Scalar threshold_beta0(Scalar s, Scalar C) {
  if (s == Scalar(0)) return 0;
  const Scalar q = s / (C * (2 * s + 1));
  return q * q;
}

template <typename Scalar>
struct GrowthReport {
  bool pass;
  Scalar worst_margin;  ///< min over samples of alpha + beta ln^2(1+|x|) - |g'(x)|
  Scalar worst_x;
};

/// Checks |g'(x)| <= alpha + beta ln^2(1+|x|) on uniform and log-spaced
/// samples of the range.
template <typename Scalar>
GrowthReport<Scalar> growth_check(const Nonlinearity<Scalar>& nl, Interval<Scalar> range,
                                  int samples) {
  auto margin = [&](Scalar x) {
    const Scalar L = std::log1p(std::abs(x));
    return nl.growth_alpha + nl.growth_beta * L * L - std::abs(nl.gprime(x));
  };
  GrowthReport<Scalar> rep{true, std::numeric_limits<Scalar>::infinity(), 0};
  auto visit = [&](Scalar x) {
    const Scalar m = margin(x);
    if (m < rep.worst_margin) {
      rep.worst_margin = m;
      rep.worst_x = x;
    }
  };
  for (int i = 0; i < samples; ++i)
    visit(range.lo + (range.hi - range.lo) * Scalar(i) / Scalar(samples - 1));
  const Scalar big = std::max(std::abs(range.lo), std::abs(range.hi));
  if (big > Scalar(1)) {
    for (int i = 0; i < samples; ++i) {
      const Scalar mag = std::exp(std::log(big) * Scalar(i) / Scalar(samples - 1));
      visit(mag);
      visit(-mag);
    }
  }
  rep.pass = rep.worst_margin >= -std::numeric_limits<Scalar>::epsilon();
  return rep;
}

template <typename Scalar>
struct ConstantPrediction {
  Scalar c;
  std::optional<long> k0;  ///< empty when s=0 and c >= 1 (no finite prediction)
};

/// Convergence constants predicted from an empirical C: the contraction
/// parameter c and the iteration count k0 after which the decay is
/// superlinear. Labeled predictions; C_emp is a caller-supplied stand-in.
template <typename Scalar>
ConstantPrediction<Scalar> predict_constants(const Nonlinearity<Scalar>& nl, Scalar C_emp,
                                             Scalar E0, Scalar M) {
  const Scalar s = nl.s;
  const Scalar seminorm = (s == Scalar(0)) ? 2 * nl.growth_alpha : nl.holder_seminorm;
  const Scalar c = seminorm * std::pow(C_emp, 2 + s) *
                   std::exp((1 + s) * C_emp * std::sqrt(nl.growth_alpha)) *
                   std::pow(1 + M, (1 + s) * C_emp * std::sqrt(nl.growth_beta));
  ConstantPrediction<Scalar> out{c, std::nullopt};
  if ((1 + s) * c * std::pow(E0, s / 2) < Scalar(1)) {
    out.k0 = 0;
  } else if (s > Scalar(0)) {
    const Scalar raw = std::pow(1 + s, 1 + 1 / s) / s * (std::pow(c, 1 / s) * std::sqrt(E0) - 1);
    // c^{1/s} explodes for small s; report a count only while the floor is
    // exactly representable
    if (std::isfinite(raw) && raw < Scalar(1ll << 52)) out.k0 = long(std::floor(raw)) + 1;
  }
  return out;
}

}  // namespace wavectl
