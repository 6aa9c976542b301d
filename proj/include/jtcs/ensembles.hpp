#pragma once

// Random measurement-matrix ensembles. All three ensembles have i.i.d.
// entries with mean 0 and variance 1, so for an N-row matrix the squared
// column norms concentrate around N and ||Ax||^2 concentrates around
// N||x||^2. Matrices are reproducible bit-exactly from (kind, N, M, seed):
// entry (i, j) is a pure function of those four values.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

#include "jtcs/rng.hpp"

namespace jtcs {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class EnsembleKind {
  GaussianUnit,   // N(0, 1)
  Rademacher,     // +1, -1 each with probability 1/2
  SparseTernary,  // +sqrt(3) w.p. 1/6, 0 w.p. 2/3, -sqrt(3) w.p. 1/6
};

inline const char* to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::GaussianUnit: return "gaussian";
    case EnsembleKind::Rademacher: return "rademacher";
    case EnsembleKind::SparseTernary: return "sparse-ternary";
  }
  return "unknown";
}

inline EnsembleKind ensemble_from_string(const std::string& name) {
  if (name == "gaussian") return EnsembleKind::GaussianUnit;
  if (name == "rademacher") return EnsembleKind::Rademacher;
  if (name == "sparse-ternary") return EnsembleKind::SparseTernary;
  throw std::invalid_argument(
      "unknown ensemble '" + name +
      "' (valid: gaussian, rademacher, sparse-ternary)");
}

struct MeasurementMatrix {
  Matrix entries;
  EnsembleKind kind = EnsembleKind::GaussianUnit;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return entries.rows(); }
  Eigen::Index m() const { return entries.cols(); }
};

namespace detail {

// Entry (i, j) of the matrix identified by (kind, seed). Row and column
// indices are zero-based here.
inline double ensemble_entry(EnsembleKind kind, std::uint64_t row_key, std::uint64_t j) {
  const std::uint64_t cell = rng::substream(row_key, j);
  switch (kind) {
    case EnsembleKind::GaussianUnit:
      return rng::gaussian_at(cell, 0);
    case EnsembleKind::Rademacher:
      return (rng::bits_at(cell, 0) >> 63) ? 1.0 : -1.0;
    case EnsembleKind::SparseTernary: {
      constexpr double sqrt3 = 1.7320508075688772935274463415059;
      const double u = rng::uniform_at(cell, 0);
      if (u < 1.0 / 6.0) return sqrt3;
      if (u < 5.0 / 6.0) return 0.0;
      return -sqrt3;
    }
  }
  throw std::logic_error("unreachable ensemble kind");
}

}  // namespace detail

inline MeasurementMatrix sample_matrix(EnsembleKind kind, int N, int M,
                                       std::uint64_t seed) {
  if (N < 1 || M < 1) throw std::invalid_argument("sample_matrix: N and M must be >= 1");
  MeasurementMatrix A;
  A.kind = kind;
  A.seed = seed;
  A.entries.resize(N, M);
  for (int i = 0; i < N; ++i) {
    const std::uint64_t row_key = rng::substream(seed, static_cast<std::uint64_t>(i));
    for (int j = 0; j < M; ++j) {
      A.entries(i, j) = detail::ensemble_entry(kind, row_key, static_cast<std::uint64_t>(j));
    }
  }
  return A;
}

// Fraction of sampled matrices violating
//   | ||Ax||^2 - N||x||^2 | >= eps * N * ||x||^2.
// Matrix t of the sequence is the one sample_matrix would produce with seed
// substream(seed, t); rows are streamed so the matrix is never materialized.
inline double concentration_violation_rate(EnsembleKind kind, int N, int M,
                                           const Vector& x, double eps,
                                           long long trials,
                                           std::uint64_t seed) {
  if (N < 1 || M < 1) throw std::invalid_argument("concentration_violation_rate: N and M must be >= 1");
  if (x.size() != M) throw std::invalid_argument("concentration_violation_rate: x must have length M");
  if (x.squaredNorm() == 0.0) throw std::invalid_argument("concentration_violation_rate: x must be nonzero");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("concentration_violation_rate: eps must lie in (0,1)");
  if (trials < 1) throw std::invalid_argument("concentration_violation_rate: trials must be >= 1");

  const double x_sq = x.squaredNorm();
  const double threshold = eps * static_cast<double>(N) * x_sq;
  long long violations = 0;
  for (long long t = 0; t < trials; ++t) {
    const std::uint64_t mat_seed = rng::substream(seed, static_cast<std::uint64_t>(t));
    double ax_sq = 0.0;
    for (int i = 0; i < N; ++i) {
      const std::uint64_t row_key = rng::substream(mat_seed, static_cast<std::uint64_t>(i));
      double dot = 0.0;
      for (int j = 0; j < M; ++j) {
        dot += detail::ensemble_entry(kind, row_key, static_cast<std::uint64_t>(j)) * x[j];
      }
      ax_sq += dot * dot;
    }
    if (std::abs(ax_sq - static_cast<double>(N) * x_sq) >= threshold) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(trials);
}

struct GramStats {
  double max_offdiag = 0.0;
  double diag_min = 0.0;
  double diag_max = 0.0;
};

// Entries of (1/N) A^T A: largest |off-diagonal| and the diagonal range.
inline GramStats column_gram_stats(const MeasurementMatrix& A) {
  const Eigen::Index M = A.m();
  if (M < 2) throw std::invalid_argument("column_gram_stats: M must be >= 2");
  const Eigen::MatrixXd gram =
      (A.entries.transpose() * A.entries) / static_cast<double>(A.n());
  GramStats stats;
  stats.diag_min = gram(0, 0);
  stats.diag_max = gram(0, 0);
  for (Eigen::Index i = 0; i < M; ++i) {
    stats.diag_min = std::min(stats.diag_min, gram(i, i));
    stats.diag_max = std::max(stats.diag_max, gram(i, i));
    for (Eigen::Index j = i + 1; j < M; ++j) {
      stats.max_offdiag = std::max(stats.max_offdiag, std::abs(gram(i, j)));
    }
  }
  return stats;
}

}  // namespace jtcs
