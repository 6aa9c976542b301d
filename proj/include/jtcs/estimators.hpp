#pragma once

// The two estimators under study plus a brute-force maximum-likelihood
// oracle. The genie-aided structural least squares estimator (SLSE) solves
// argmin ||y - A_tau x|| on the true support; the joint-typicality
// estimator scans every K-subset, returns the SLSE on the unique typical
// subset, and returns the all-zero vector otherwise.
//
// The subset scan is combinatorial by design. To keep desk-scale runs
// feasible the scan evaluates each subset's squared residual from the
// precomputed Gram matrix G = A^T A and b = A^T y with an incremental
// Cholesky factorization shared along lexicographic prefixes:
//   ||P_perp_xi y||^2 = ||y||^2 - ||L^{-1} b_xi||^2,  G_xi = L L^T.
// This makes a leaf cost O(K^2) independent of N. Tests pin the scan's
// residuals against the QR path used everywhere else.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "jtcs/mathutil.hpp"
#include "jtcs/projections.hpp"
#include "jtcs/typicality.hpp"

namespace jtcs {

class EnumerationBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Genie-aided least squares on a known support; returns the K coefficients.
inline Vector slse(const MeasurementMatrix& A, const SupportSet& tau, const Vector& y) {
  if (y.size() != A.n()) throw std::invalid_argument("slse: y must have length N");
  return SubsetFactor(A, tau).solve(y);
}

// All C(M,K) K-subsets of {1,...,M} in lexicographic order.
class SupportEnumerator {
 public:
  SupportEnumerator(int M, int K) : m_(M), k_(K) {
    if (K < 1 || M < 1 || K > M)
      throw std::invalid_argument("SupportEnumerator: need 1 <= K <= M");
    current_.resize(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) current_[static_cast<std::size_t>(i)] = i + 1;
  }

  bool done() const { return done_; }
  const std::vector<int>& current() const { return current_; }
  SupportSet current_set() const { return SupportSet(current_); }
  std::uint64_t count() const { return binomial_count(m_, k_); }

  // Advance to the next subset; false once the last one has been consumed.
  bool advance() {
    int d = k_ - 1;
    while (d >= 0 && current_[static_cast<std::size_t>(d)] == m_ - k_ + d + 1) --d;
    if (d < 0) {
      done_ = true;
      return false;
    }
    ++current_[static_cast<std::size_t>(d)];
    for (int i = d + 1; i < k_; ++i)
      current_[static_cast<std::size_t>(i)] = current_[static_cast<std::size_t>(i - 1)] + 1;
    return true;
  }

 private:
  int m_;
  int k_;
  bool done_ = false;
  std::vector<int> current_;
};

inline SupportEnumerator enumerate_supports(int M, int K) {
  return SupportEnumerator(M, K);
}

namespace detail {

// Core of the subset scan. KMax is a compile-time capacity (K <= KMax) so
// the factor rows live in registers/stack and the inner loops unroll; the
// arithmetic is identical for every instantiation.
template <int KMax, typename OnLeaf, typename OnSkip>
void scan_subsets_gram_impl(const Eigen::MatrixXd& G, const double* b, double y_sq,
                            int K, double pivot_tol_sq, OnLeaf&& on_leaf,
                            OnSkip&& on_skip) {
  const int M = static_cast<int>(G.rows());
  int idx[KMax];
  double chol[KMax * KMax];
  double rdiag[KMax];  // reciprocal diagonal, one division per pushed row
  double z[KMax];
  double acc[KMax];

  int d = 0;
  idx[0] = 0;
  while (true) {
    if (idx[d] > M - K + d) {
      if (d == 0) return;
      --d;
      ++idx[d];
      continue;
    }
    const int c = idx[d];

    // Row d of the Cholesky factor of G restricted to the current prefix.
    double* row = chol + d * KMax;
    const double* gcol = G.col(c).data();
    double pivot = gcol[c];
    for (int k = 0; k < d; ++k) {
      const double* prev = chol + k * KMax;
      double v = gcol[idx[k]];
      for (int t = 0; t < k; ++t) v -= row[t] * prev[t];
      const double l = v * rdiag[k];
      row[k] = l;
      pivot -= l * l;
    }
    if (pivot <= pivot_tol_sq) {
      on_skip(binomial_count(M - c - 1, K - d - 1));
      ++idx[d];
      continue;
    }
    const double ld = std::sqrt(pivot);
    row[d] = ld;
    rdiag[d] = 1.0 / ld;
    double zd = b[c];
    for (int t = 0; t < d; ++t) zd -= row[t] * z[t];
    zd *= rdiag[d];
    z[d] = zd;
    acc[d] = (d > 0 ? acc[d - 1] : 0.0) + zd * zd;

    if (d == K - 1) {
      const double residual = std::max(y_sq - acc[d], 0.0);
      if (!on_leaf(idx, residual)) return;
      ++idx[d];
    } else {
      ++d;
      idx[d] = c + 1;
    }
  }
}

// Depth-first scan of all K-subsets in lexicographic order. on_leaf gets
// zero-based indices and the squared residual and returns false to stop the
// scan early. A rank-deficient prefix prunes its whole subtree; on_skip
// receives the number of subsets skipped that way.
//
// pivot_tol_sq: Cholesky pivots (squared R-diagonals) at or below this
// count as rank-deficient; callers derive it from the QR rank rule.
template <typename OnLeaf, typename OnSkip>
void scan_subsets_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                       double y_sq, int K, double pivot_tol_sq,
                       OnLeaf&& on_leaf, OnSkip&& on_skip) {
  const double* bp = b.data();
  // Small-K kernels dominate desk-scale scans; pick the tightest capacity.
  if (K <= 4) {
    scan_subsets_gram_impl<4>(G, bp, y_sq, K, pivot_tol_sq,
                              std::forward<OnLeaf>(on_leaf), std::forward<OnSkip>(on_skip));
  } else if (K <= 8) {
    scan_subsets_gram_impl<8>(G, bp, y_sq, K, pivot_tol_sq,
                              std::forward<OnLeaf>(on_leaf), std::forward<OnSkip>(on_skip));
  } else if (K <= 16) {
    scan_subsets_gram_impl<16>(G, bp, y_sq, K, pivot_tol_sq,
                               std::forward<OnLeaf>(on_leaf), std::forward<OnSkip>(on_skip));
  } else if (K <= 32) {
    scan_subsets_gram_impl<32>(G, bp, y_sq, K, pivot_tol_sq,
                               std::forward<OnLeaf>(on_leaf), std::forward<OnSkip>(on_skip));
  } else if (K <= 64) {
    scan_subsets_gram_impl<64>(G, bp, y_sq, K, pivot_tol_sq,
                               std::forward<OnLeaf>(on_leaf), std::forward<OnSkip>(on_skip));
  } else {
    throw std::invalid_argument("subset scan: K > 64 is outside the supported range");
  }
}

inline double scan_pivot_tolerance_sq(const Eigen::MatrixXd& G, Eigen::Index N) {
  const double tol = static_cast<double>(N) * std::numeric_limits<double>::epsilon();
  return tol * tol * G.diagonal().maxCoeff();
}

}  // namespace detail

enum class EstimateOutcome { Unique, NoneTypical, Ambiguous };

inline const char* to_string(EstimateOutcome o) {
  switch (o) {
    case EstimateOutcome::Unique: return "unique";
    case EstimateOutcome::NoneTypical: return "none-typical";
    case EstimateOutcome::Ambiguous: return "ambiguous";
  }
  return "unknown";
}

struct EstimateResult {
  Vector estimate;                           // length M; zero unless Unique
  std::optional<SupportSet> detected_support;
  std::uint64_t typical_count = 0;           // capped at 2 once Ambiguous
  EstimateOutcome outcome = EstimateOutcome::NoneTypical;
  std::uint64_t rank_deficient_skipped = 0;
};

struct ScanOptions {
  std::uint64_t budget = 2'000'000;  // max C(M,K) the scan will accept
};

inline void check_scan_preconditions(const MeasurementMatrix& A, const Vector& y,
                                     int K, const ScanOptions& opts) {
  if (K < 1) throw std::invalid_argument("subset scan: K must be >= 1");
  if (K >= A.n()) throw std::invalid_argument("subset scan: need K < N");
  if (K > A.m()) throw std::invalid_argument("subset scan: need K <= M");
  if (y.size() != A.n()) throw std::invalid_argument("subset scan: y must have length N");
  const std::uint64_t total = binomial_count(static_cast<int>(A.m()), K);
  if (total > opts.budget)
    throw EnumerationBudgetError("C(M,K) = " + std::to_string(total) +
                                 " exceeds the enumeration budget of " +
                                 std::to_string(opts.budget));
}

inline SupportSet support_from_zero_based(const int* idx, int K) {
  std::vector<int> one_based(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) one_based[static_cast<std::size_t>(i)] = idx[i] + 1;
  return SupportSet(std::move(one_based));
}

// Scans all K-subsets for joint typicality. Exactly one typical subset
// yields the SLSE on it embedded into a length-M vector; zero or several
// yield the all-zero vector. The scan stops once two typical subsets are
// seen (the outcome is already Ambiguous).
inline EstimateResult joint_typicality_estimate(const MeasurementMatrix& A,
                                                const Vector& y, int K,
                                                const TypicalityParams& params,
                                                const ScanOptions& opts = {}) {
  params.validate();
  check_scan_preconditions(A, y, K, opts);
  const double n = static_cast<double>(A.n());
  const double center = (n - K) * params.sigma_n_sq;
  const double lo = center - n * params.eps;
  const double hi = center + n * params.eps;

  const Eigen::MatrixXd G = A.entries.transpose() * A.entries;
  const Eigen::VectorXd b = A.entries.transpose() * y;
  const double y_sq = y.squaredNorm();
  const double pivot_tol = detail::scan_pivot_tolerance_sq(G, A.n());

  EstimateResult result;
  result.estimate = Vector::Zero(A.m());
  std::vector<int> first(static_cast<std::size_t>(K));
  detail::scan_subsets_gram(
      G, b, y_sq, K, pivot_tol,
      [&](const int* idx, double residual) {
        if (residual > lo && residual < hi) {
          if (result.typical_count == 0)
            std::copy(idx, idx + K, first.begin());
          ++result.typical_count;
          if (result.typical_count >= 2) return false;
        }
        return true;
      },
      [&](std::uint64_t skipped) { result.rank_deficient_skipped += skipped; });

  if (result.typical_count == 1) {
    result.outcome = EstimateOutcome::Unique;
    result.detected_support = support_from_zero_based(first.data(), K);
    const Vector coeffs = slse(A, *result.detected_support, y);
    const auto& idx = result.detected_support->indices();
    for (std::size_t i = 0; i < idx.size(); ++i)
      result.estimate[idx[i] - 1] = coeffs[static_cast<Eigen::Index>(i)];
  } else if (result.typical_count == 0) {
    result.outcome = EstimateOutcome::NoneTypical;
  } else {
    result.outcome = EstimateOutcome::Ambiguous;
  }
  return result;
}

// Minimum-residual K-subset (for Gaussian noise, the maximum-likelihood
// support), ties broken lexicographically; returns it with its SLSE
// coefficients. Rank-deficient subsets are skipped.
inline std::pair<SupportSet, Vector> exhaustive_ml_oracle(const MeasurementMatrix& A,
                                                          const Vector& y, int K,
                                                          const ScanOptions& opts = {}) {
  check_scan_preconditions(A, y, K, opts);
  const Eigen::MatrixXd G = A.entries.transpose() * A.entries;
  const Eigen::VectorXd b = A.entries.transpose() * y;
  const double y_sq = y.squaredNorm();
  const double pivot_tol = detail::scan_pivot_tolerance_sq(G, A.n());

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_idx;
  std::vector<int> scratch(static_cast<std::size_t>(K));
  detail::scan_subsets_gram(
      G, b, y_sq, K, pivot_tol,
      [&](const int* idx, double residual) {
        if (residual < best) {
          best = residual;
          best_idx.assign(idx, idx + K);
        }
        return true;
      },
      [](std::uint64_t) {});
  if (best_idx.empty())
    throw RankDeficientError("every candidate subset is rank-deficient");
  SupportSet support = support_from_zero_based(best_idx.data(), K);
  Vector coeffs = slse(A, support, y);
  return {std::move(support), std::move(coeffs)};
}

}  // namespace jtcs
