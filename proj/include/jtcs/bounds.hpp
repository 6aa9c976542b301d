#pragma once

// Closed-form quantities: the genie-aided Cramér-Rao bound (exact and
// asymptotic), the sparsity-ratio threshold, the Chernoff tail bounds on
// the two typicality error events with the optimized tilt nu*, the
// asymptotic and prior-work false-typicality forms, and the MSE bound
// assembly for the joint-typicality estimator.
//
// Notation used throughout (all in signal^2 units):
//   alpha = K/N, beta = M/K
//   sigma'^2 = (1 - alpha) sigma_n^2        projected noise variance
//   eps'    = (1 - alpha) eps
//   eps_bar = gamma^2 - eps                 requires eps < gamma^2
//   C0      = (N - K) / (4K)
// Logarithms are natural throughout; the binomial inequality
// C(K,k') <= exp(k' ln(Ke/k')) used in the MSE assembly forces base e.

#include <cmath>
#include <stdexcept>

#include "jtcs/mathutil.hpp"
#include "jtcs/projections.hpp"

namespace jtcs {

// Scalar bundle feeding every closed-form bound. Derived fields are
// computed here, never passed independently, so they cannot drift apart.
//
// s_norm_sq carries the signal energy relevant to the bound being
// evaluated: ||s||^2 for the MSE assembly, and the energy of the taps the
// candidate support misses (sum over tau\xi of s_i^2) for the asymptotic
// false-typicality variants.
struct BoundInputs {
  int N = 0;
  int K = 0;
  int M = 0;
  double sigma_n_sq = 0.0;
  double eps = 0.0;
  double gamma_sq = 0.0;
  double mu_sq = 0.0;
  double s_norm_sq = 0.0;

  // Derived.
  double alpha = 0.0;
  double beta = 0.0;
  double sigma_prime_sq = 0.0;
  double eps_prime = 0.0;
  double eps_bar = 0.0;
  double c0 = 0.0;

  BoundInputs(int N_, int K_, int M_, double sigma_n_sq_, double eps_,
              double gamma_sq_ = 0.0, double mu_sq_ = 0.0, double s_norm_sq_ = 0.0)
      : N(N_), K(K_), M(M_), sigma_n_sq(sigma_n_sq_), eps(eps_),
        gamma_sq(gamma_sq_), mu_sq(mu_sq_), s_norm_sq(s_norm_sq_) {
    if (N < 1 || K < 1 || M < 1) throw std::invalid_argument("BoundInputs: N, K, M must be >= 1");
    if (K >= N) throw std::invalid_argument("BoundInputs: need K < N");
    if (K > M) throw std::invalid_argument("BoundInputs: need K <= M");
    if (sigma_n_sq < 0.0) throw std::invalid_argument("BoundInputs: sigma_n_sq must be >= 0");
    if (!(eps > 0.0)) throw std::invalid_argument("BoundInputs: eps must be > 0");
    if (gamma_sq < 0.0) throw std::invalid_argument("BoundInputs: gamma_sq must be >= 0");
    alpha = static_cast<double>(K) / static_cast<double>(N);
    beta = static_cast<double>(M) / static_cast<double>(K);
    sigma_prime_sq = (1.0 - alpha) * sigma_n_sq;
    eps_prime = (1.0 - alpha) * eps;
    eps_bar = gamma_sq - eps;
    c0 = static_cast<double>(N - K) / (4.0 * static_cast<double>(K));
  }

  double nk() const { return static_cast<double>(N - K); }
};

// CRB-S = sigma_n^2 Trace[(A_tau^T A_tau)^{-1}], evaluated through the
// pivoted QR factor rather than an explicit Gram inverse.
inline double crb_s(const MeasurementMatrix& A, const SupportSet& tau,
                    double sigma_n_sq) {
  if (sigma_n_sq < 0.0) throw std::invalid_argument("crb_s: sigma_n_sq must be >= 0");
  return sigma_n_sq * SubsetFactor(A, tau).trace_gram_inverse();
}

// Large-system limit of CRB-S for unit-variance ensembles.
inline double crb_s_asymptotic(double alpha, double sigma_n_sq) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("crb_s_asymptotic: alpha must lie in (0,1)");
  return alpha * sigma_n_sq;
}

// Sparsity-ratio threshold 1 / (9 + 4 ln(beta - 1)) under which the
// estimator's MSE bound collapses to alpha sigma_n^2.
inline double alpha_threshold(double beta) {
  if (!(beta > 1.0)) throw std::invalid_argument("alpha_threshold: beta must be > 1");
  const double denom = 9.0 + 4.0 * std::log(beta - 1.0);
  if (!(denom > 0.0))
    throw std::invalid_argument("alpha_threshold: 9 + 4 ln(beta - 1) must be positive");
  return 1.0 / denom;
}

struct MissBoundTerms {
  double upper_tail = 0.0;
  double lower_tail = 0.0;
  // The lower-tail event phi_1 < (N-K) sigma_n^2 - N eps is impossible once
  // eps >= sigma'^2 (phi_1 >= 0); the term is then reported as 0.
  bool lower_tail_degenerate = false;

  double total() const { return upper_tail + lower_tail; }
};

// Chernoff bound on P{tau not typical}: two central chi^2 tails with
// x = eps / sigma'^2,
//   upper: exp(-(N-K)/2 (x - ln(1+x)))
//   lower: exp(-(N-K)/2 (-x - ln(1-x)))      (valid for eps < sigma'^2)
inline MissBoundTerms chernoff_miss_bound_terms(const BoundInputs& b) {
  if (!(b.sigma_prime_sq > 0.0))
    throw std::invalid_argument("chernoff_miss_bound: requires sigma_n_sq > 0");
  MissBoundTerms terms;
  const double x = b.eps / b.sigma_prime_sq;
  terms.upper_tail = std::exp(-0.5 * b.nk() * (x - std::log1p(x)));
  if (x >= 1.0) {
    terms.lower_tail = 0.0;
    terms.lower_tail_degenerate = true;
  } else {
    terms.lower_tail = std::exp(-0.5 * b.nk() * (-x - std::log1p(-x)));
  }
  return terms;
}

inline double chernoff_miss_bound(const BoundInputs& b) {
  return chernoff_miss_bound_terms(b).total();
}

// Tilted non-central chi^2 bound factor
//   g(nu) = (1 - 2 nu sigma^2)^{-(N-K)/2}
//           exp(nu N gamma^2 / (1 - 2 nu sigma^2)
//               - nu [(N-K) sigma^2 + N gamma^2 - N eps_bar]),
// defined for 1 - 2 nu sigma^2 > 0. The non-centrality sum of squared
// means equals N gamma^2.
inline double g_of_nu(double nu, const BoundInputs& b) {
  const double x = 1.0 - 2.0 * nu * b.sigma_n_sq;
  if (!(x > 0.0))
    throw std::invalid_argument("g_of_nu: requires 1 - 2 nu sigma_n_sq > 0");
  const double n = static_cast<double>(b.N);
  const double log_g = -0.5 * b.nk() * std::log(x) +
                       nu * n * b.gamma_sq / x -
                       nu * (b.nk() * b.sigma_n_sq + n * b.gamma_sq - n * b.eps_bar);
  return std::exp(log_g);
}

namespace detail {

// sqrt((sigma'^2 + 2 gamma^2)^2 - 4 gamma^2 eps_bar); always real since the
// radicand equals sigma'^4 + 4 gamma^2 sigma'^2 + 4 gamma^2 eps.
inline double tilt_discriminant_root(const BoundInputs& b) {
  const double s2 = b.sigma_prime_sq + 2.0 * b.gamma_sq;
  return std::sqrt(s2 * s2 - 4.0 * b.gamma_sq * b.eps_bar);
}

}  // namespace detail

struct NuStarResult {
  double nu = 0.0;
  double g_min = 0.0;
};

// Closed forms at the optimizing tilt. The stationary condition is
//   (sigma'^2 + gamma^2 - eps_bar) X^2 - sigma'^2 X - gamma^2 = 0
// with X = 1 - 2 nu sigma_n^2; only the positive root is admissible.
struct TiltClosedForms {
  double one_minus_two_nu_sigma_sq = 0.0;  // X
  double reciprocal = 0.0;                 // 1 / X
  double nu_star = 0.0;
  double gamma_ratio = 0.0;                // gamma^2 nu* / X
};

inline TiltClosedForms tilt_closed_forms(const BoundInputs& b) {
  if (!(b.eps_bar > 0.0))
    throw std::invalid_argument("tilt_closed_forms: requires eps < gamma_sq");
  if (!(b.gamma_sq > 0.0))
    throw std::invalid_argument("tilt_closed_forms: requires gamma_sq > 0");
  if (!(b.sigma_n_sq > 0.0))
    throw std::invalid_argument("tilt_closed_forms: requires sigma_n_sq > 0");
  const double root = detail::tilt_discriminant_root(b);
  TiltClosedForms f;
  f.one_minus_two_nu_sigma_sq =
      (b.sigma_prime_sq + root) / (2.0 * (b.sigma_prime_sq + b.gamma_sq - b.eps_bar));
  f.reciprocal = (root - b.sigma_prime_sq) / (2.0 * b.gamma_sq);
  f.nu_star = (2.0 * b.gamma_sq - 2.0 * b.eps_bar + b.sigma_prime_sq - root) /
              (4.0 * b.sigma_n_sq * (b.gamma_sq - b.eps_bar + b.sigma_prime_sq));
  f.gamma_ratio = (root - b.sigma_prime_sq - 2.0 * b.gamma_sq) / (4.0 * b.sigma_n_sq);
  return f;
}

// Minimizer of g over the admissible tilt range, with the minimum value.
// nu* < 0 and 1 - 2 nu* sigma_n^2 > 0 for every valid input.
inline NuStarResult nu_star(const BoundInputs& b) {
  const TiltClosedForms forms = tilt_closed_forms(b);
  NuStarResult result;
  result.nu = forms.nu_star;
  result.g_min = g_of_nu(result.nu, b);
  return result;
}

// The four successive forms of the false-typicality bound, tightest first:
// the exact minimum g(nu*), the sqrt-relaxed form, its logarithmic
// simplification, and the final squared form. Each step only loosens, so
// the values are non-decreasing.
struct ChernoffChain {
  double tightest = 0.0;      // g(nu*) in closed form
  double sqrt_relaxed = 0.0;  // sqrt(1-q) replaced by 1 - q/2
  double log_form = 0.0;      // exp(-(N-K)/2 (-x - ln(1-x)))
  double squared_form = 0.0;  // exp(-(N-K)/4 x^2)
};

inline ChernoffChain chernoff_chain(const BoundInputs& b) {
  if (!(b.eps_bar > 0.0))
    throw std::invalid_argument("chernoff_chain: requires eps < gamma_sq");
  if (!(b.gamma_sq > 0.0))
    throw std::invalid_argument("chernoff_chain: requires gamma_sq > 0");
  const double n = static_cast<double>(b.N);
  const double s2 = b.sigma_prime_sq + 2.0 * b.gamma_sq;
  const double q = 4.0 * b.gamma_sq * b.eps_bar / (s2 * s2);
  const double x = b.eps_bar / s2;

  const auto evaluate = [&](double root) {
    return std::exp(-n * (s2 - b.eps_bar - root) / (2.0 * b.sigma_n_sq) +
                    0.5 * b.nk() * std::log((root - b.sigma_prime_sq) / (2.0 * b.gamma_sq)));
  };

  ChernoffChain chain;
  chain.tightest = evaluate(detail::tilt_discriminant_root(b));
  chain.sqrt_relaxed = evaluate(s2 * (1.0 - 0.5 * q));
  chain.log_form = std::exp(-0.5 * b.nk() * (-x - std::log1p(-x)));
  chain.squared_form = std::exp(-0.25 * b.nk() * x * x);
  return chain;
}

enum class FalseTypicalityVariant {
  Exact,      // squared form with the instance gamma^2
  Asymptotic, // gamma^2 replaced by the missed-tap energy, this work
  PriorWork,  // same replacement, earlier bound with the smaller denominator
};

// A zero numerator (eps at exactly gamma^2, or eps' at exactly the missed
// energy) is allowed and yields the vacuous bound 1; a negative numerator
// is rejected.
inline double false_typicality_bound(const BoundInputs& b,
                                     FalseTypicalityVariant variant) {
  const double c = 0.25 * b.nk();
  switch (variant) {
    case FalseTypicalityVariant::Exact: {
      if (b.gamma_sq < b.eps)
        throw std::invalid_argument("false_typicality_bound: exact variant requires gamma_sq >= eps");
      const double ratio = (b.gamma_sq - b.eps) / (b.sigma_prime_sq + 2.0 * b.gamma_sq);
      return std::exp(-c * ratio * ratio);
    }
    case FalseTypicalityVariant::Asymptotic: {
      if (b.s_norm_sq < b.eps_prime)
        throw std::invalid_argument("false_typicality_bound: requires missed-tap energy >= eps'");
      const double ratio = (b.s_norm_sq - b.eps_prime) / (2.0 * b.s_norm_sq + b.sigma_n_sq);
      return std::exp(-c * ratio * ratio);
    }
    case FalseTypicalityVariant::PriorWork: {
      if (b.s_norm_sq < b.eps_prime)
        throw std::invalid_argument("false_typicality_bound: requires missed-tap energy >= eps'");
      const double ratio = (b.s_norm_sq - b.eps_prime) / (b.s_norm_sq + b.sigma_n_sq);
      return std::exp(-c * ratio * ratio);
    }
  }
  throw std::logic_error("unreachable variant");
}

// Exponent rate of the k'-th union-bound term at z = k'/K:
//   f(z) = Kz ln(e/z) + Kz ln((beta-1)e/z)
//          - C0 K ((Kz mu^2 - eps') / (2Kz mu^2 + sigma^2))^2.
inline double f_z(double z, const BoundInputs& b) {
  if (!(z > 0.0 && z <= 1.0)) throw std::invalid_argument("f_z: z must lie in (0,1]");
  const double kz = static_cast<double>(b.K) * z;
  const double ratio = (kz * b.mu_sq - b.eps_prime) / (2.0 * kz * b.mu_sq + b.sigma_n_sq);
  return kz * std::log(std::exp(1.0) / z) +
         kz * std::log((b.beta - 1.0) * std::exp(1.0) / z) -
         b.c0 * static_cast<double>(b.K) * ratio * ratio;
}

// MSE assembly for the joint-typicality estimator:
//   alpha sigma'^2 + (K sigma'^2 + ||s||^2)
//     * sum_{k'=1..K} C(K,k') C(M-K,k')
//         exp(-(N-K)/4 ((k' mu^2 - eps') / (2 k' mu^2 + sigma^2))^2).
// Binomials are evaluated in the log domain so large M cannot overflow.
inline double mse_upper_bound(const BoundInputs& b) {
  if (!(b.mu_sq > b.eps_prime))
    throw std::invalid_argument("mse_upper_bound: requires mu^2 > eps'");
  double sum = 0.0;
  for (int kp = 1; kp <= b.K; ++kp) {
    const double num = static_cast<double>(kp) * b.mu_sq - b.eps_prime;
    const double den = 2.0 * static_cast<double>(kp) * b.mu_sq + b.sigma_n_sq;
    const double ratio = num / den;
    const double log_term = log_choose(b.K, kp) + log_choose(b.M - b.K, kp) -
                            0.25 * b.nk() * ratio * ratio;
    sum += std::exp(log_term);
  }
  return b.alpha * b.sigma_prime_sq + (static_cast<double>(b.K) * b.sigma_prime_sq + b.s_norm_sq) * sum;
}

}  // namespace jtcs
