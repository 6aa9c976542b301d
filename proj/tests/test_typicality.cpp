#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "jtcs/bounds.hpp"
#include "jtcs/typicality.hpp"
#include "test_support.hpp"

using namespace jtcs;

TEST_CASE("statistic is zero for noiseless observations on the true support") {
  const auto A = sample_matrix(EnsembleKind::GaussianUnit, 12, 8, 5);
  const SupportSet tau({2, 6});
  Vector coeffs(2);
  coeffs << 1.0, -2.5;
  const Vector y = submatrix(A, tau) * coeffs;
  REQUIRE(typicality_statistic(A, tau, y, 0.0) < 1e-10);
  REQUIRE(is_typical(A, tau, y, {0.0, 1e-9}));
}

TEST_CASE("zero observation pins the statistic at (N-K)/N") {
  const auto A = sample_matrix(EnsembleKind::GaussianUnit, 16, 8, 6);
  const SupportSet xi({1, 2, 3, 4});
  const Vector y = Vector::Zero(16);
  const double stat = typicality_statistic(A, xi, y, 1.0);
  REQUIRE(stat == 12.0 / 16.0);
  // Strict comparison: eps at exactly the statistic is not typical.
  REQUIRE_FALSE(is_typical(A, xi, y, {1.0, 12.0 / 16.0}));
  REQUIRE_FALSE(is_typical(A, xi, y, {1.0, 0.5}));
  REQUIRE(is_typical(A, xi, y, {1.0, 0.7500000001}));
}

TEST_CASE("monotonicity in eps") {
  const auto A = sample_matrix(EnsembleKind::SparseTernary, 20, 10, 7);
  const SupportSet xi({3, 9, 10});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector y = jtcs_test::random_unit_gaussian(rng::substream(seed, 1), 20);
    const double stat = typicality_statistic(A, xi, y, 0.8);
    for (double eps1 : {0.05, 0.2, 0.5}) {
      for (double eps2 : {0.1, 0.4, 1.0}) {
        if (eps2 <= eps1) continue;
        if (stat < eps1) REQUIRE(stat < eps2);  // nested events
      }
    }
  }
}

TEST_CASE("normalized residual mean matches the chi-square formula") {
  // E{phi_1} = (N-K) sigma^2 at the true support.
  const int N = 64, K = 4;
  const double sigma_sq = 1.0;
  const auto A = sample_matrix(EnsembleKind::GaussianUnit, N, 16, 8);
  const SupportSet tau = SupportSet::first_k(K);
  const SubsetFactor factor(A, tau);
  const Matrix a_tau = submatrix(A, tau);
  const long long trials = 100000;
  double sum = 0.0;
  for (long long t = 0; t < trials; ++t) {
    const std::uint64_t key = rng::substream(900, static_cast<std::uint64_t>(t));
    Vector coeffs(K);
    for (int i = 0; i < K; ++i) coeffs[i] = 2.0 * rng::gaussian_at(rng::substream(key, 1), i);
    Vector noise(N);
    for (int i = 0; i < N; ++i) noise[i] = rng::gaussian_at(rng::substream(key, 2), i);
    const Vector y = a_tau * coeffs + noise;
    sum += factor.residual_sq_norm(y) / N;
  }
  const double mean = sum / trials;
  const double expected = (N - K) * sigma_sq / N;
  REQUIRE(std::abs(mean - expected) < 0.01 * expected);
}

TEST_CASE("true support is typical with high probability") {
  const int N = 128, K = 4;
  const auto A = sample_matrix(EnsembleKind::GaussianUnit, N, 16, 9);
  const SupportSet tau = SupportSet::first_k(K);
  const SubsetFactor factor(A, tau);
  const Matrix a_tau = submatrix(A, tau);
  const long long trials = 10000;
  long long typical = 0, typical_wide = 0;
  for (long long t = 0; t < trials; ++t) {
    const std::uint64_t key = rng::substream(901, static_cast<std::uint64_t>(t));
    Vector coeffs(K);
    for (int i = 0; i < K; ++i) coeffs[i] = 3.0;
    Vector noise(N);
    for (int i = 0; i < N; ++i) noise[i] = rng::gaussian_at(key, static_cast<std::uint64_t>(i));
    const Vector y = a_tau * coeffs + noise;
    const double stat = typicality_statistic_from_residual(factor.residual_sq_norm(y), N, K, 1.0);
    if (stat < 0.3) ++typical;
    if (stat < 0.4) ++typical_wide;
  }
  // At eps = 0.3 the exact chi-square probability is ~0.985 (the deviation
  // threshold sits at ~2.44 sd of phi_1 / N); eps = 0.4 clears 99%.
  REQUIRE(static_cast<double>(typical) / trials >= 0.98);
  REQUIRE(static_cast<double>(typical_wide) / trials >= 0.99);
}

TEST_CASE("miss probability decays with N and respects the Chernoff bound") {
  const double sigma_sq = 1.0, eps = 0.2;
  double prev_p = 1.0, prev_se = 0.0;
  for (int N : {64, 256}) {
    const int K = N / 16;
    const auto A = sample_matrix(EnsembleKind::GaussianUnit, N, 2 * K, 10);
    const SupportSet tau = SupportSet::first_k(K);
    const SubsetFactor factor(A, tau);
    const long long trials = 4000;
    long long misses = 0;
    for (long long t = 0; t < trials; ++t) {
      const std::uint64_t key = rng::substream(902 + N, static_cast<std::uint64_t>(t));
      Vector noise(N);
      for (int i = 0; i < N; ++i) noise[i] = rng::gaussian_at(key, static_cast<std::uint64_t>(i));
      // The signal projects out exactly, so noise alone drives phi_1.
      const double stat =
          typicality_statistic_from_residual(factor.residual_sq_norm(noise), N, K, sigma_sq);
      if (stat >= eps) ++misses;
    }
    const double p = static_cast<double>(misses) / trials;
    const double se = std::sqrt(p * (1 - p) / trials);
    const double bound = chernoff_miss_bound(BoundInputs(N, K, 2 * K, sigma_sq, eps));
    REQUIRE(p - 4 * se <= bound);
    REQUIRE(p <= prev_p + 2 * std::sqrt(se * se + prev_se * prev_se));
    prev_p = p;
    prev_se = se;
  }
}

TEST_CASE("parameter validation") {
  TypicalityParams bad{-1.0, 0.1};
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  TypicalityParams bad2{1.0, 0.0};
  REQUIRE_THROWS_AS(bad2.validate(), std::invalid_argument);
}
