#pragma once

// Orthogonal projection machinery: least-squares residuals against column
// spans, the rotated columns living in the complement subspace, and the
// non-centrality energy gamma^2.
//
// Residuals and solves go through a column-pivoted QR factorization; the
// explicit projector A(A^T A)^{-1} A^T appears only in oracle tests.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "jtcs/ensembles.hpp"
#include "jtcs/sparse_signal.hpp"
#include "jtcs/support_set.hpp"

namespace jtcs {

// A_xi is numerically rank-deficient at the declared tolerance: diagonal
// entries of the pivoted R factor below max|R_00| * N * machine-epsilon
// count as zero.
class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_support_range(const SupportSet& xi, Eigen::Index M) {
  if (xi.max_index() > M)
    throw std::invalid_argument("support index " + std::to_string(xi.max_index()) +
                                " out of range for M=" + std::to_string(M));
}

// Columns of A at xi's indices, order preserved.
inline Matrix submatrix(const MeasurementMatrix& A, const SupportSet& xi) {
  check_support_range(xi, A.m());
  Matrix out(A.n(), xi.k());
  const auto& idx = xi.indices();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = A.entries.col(idx[j] - 1);
  }
  return out;
}

// Column-pivoted QR of one candidate submatrix, cached so Monte Carlo loops
// can reuse it across noise draws.
class SubsetFactor {
 public:
  SubsetFactor(const MeasurementMatrix& A, const SupportSet& xi)
      : SubsetFactor(submatrix(A, xi)) {}

  explicit SubsetFactor(Matrix a_xi) : a_(std::move(a_xi)), qr_(a_.rows(), a_.cols()) {
    if (a_.cols() < 1) throw std::invalid_argument("SubsetFactor: empty support");
    if (a_.rows() < a_.cols())
      throw std::invalid_argument("SubsetFactor: need N >= K");
    qr_.setThreshold(static_cast<double>(a_.rows()) *
                     std::numeric_limits<double>::epsilon());
    qr_.compute(a_);
    if (qr_.rank() < a_.cols())
      throw RankDeficientError("candidate submatrix is numerically rank-deficient");
  }

  Eigen::Index n() const { return a_.rows(); }
  int k() const { return static_cast<int>(a_.cols()); }

  // Least-squares coefficients argmin_x ||y - A_xi x||.
  Vector solve(const Vector& y) const { return qr_.solve(y); }

  Vector residual_vector(const Vector& y) const { return y - a_ * solve(y); }

  // ||P_perp y||^2, evaluated as the least-squares residual.
  double residual_sq_norm(const Vector& y) const {
    return residual_vector(y).squaredNorm();
  }

  // Thin orthonormal basis of span(A_xi).
  Matrix thin_q() const {
    Matrix q = Matrix::Identity(a_.rows(), a_.cols());
    q.applyOnTheLeft(qr_.householderQ());
    return q;
  }

  // Trace[(A_xi^T A_xi)^{-1}] = ||R^{-1}||_F^2; the column permutation of
  // the pivoted factorization leaves the trace unchanged.
  double trace_gram_inverse() const {
    const Eigen::Index k = a_.cols();
    const Eigen::MatrixXd r =
        qr_.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    return r_inv.squaredNorm();
  }

 private:
  Matrix a_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
};

inline double residual_sq_norm(const MeasurementMatrix& A, const SupportSet& xi,
                               const Vector& y) {
  if (y.size() != A.n()) throw std::invalid_argument("residual_sq_norm: y must have length N");
  return SubsetFactor(A, xi).residual_sq_norm(y);
}

// Eigendecomposition P_perp = U D U^T with the N-K unit-eigenvalue
// eigenvectors first; returns the matrix whose column i is
// a'_i = (U^T a_i)_{N-K}. Each a'_i is defined only up to rotation within
// the unit-eigenvalue subspace; norms and inner products are invariant.
inline Matrix rotated_columns(const MeasurementMatrix& A, const SupportSet& xi) {
  const Eigen::Index N = A.n();
  const int K = xi.k();
  if (K >= N) throw std::invalid_argument("rotated_columns: need K < N");
  SubsetFactor factor(A, xi);
  const Matrix q = factor.thin_q();
  Eigen::MatrixXd p_perp = Eigen::MatrixXd::Identity(N, N) - q * q.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p_perp);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("rotated_columns: eigendecomposition failed");
  // Eigen sorts eigenvalues ascending; flip so eigenvalue 1 comes first.
  Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
  return (u.transpose() * A.entries).topRows(N - K);
}

// gamma^2 = (1/N) sum_{i,j in tau\xi} s_i s_j a'_i . a'_j. The primed inner
// products are evaluated as r_i . r_j with r_i = P_perp a_i (equal because
// the first N-K rotated coordinates span exactly the unit-eigenvalue
// subspace), so no eigendecomposition is needed.
inline double gamma_sq(const MeasurementMatrix& A, const SupportSet& xi,
                       const SparseSignal& s) {
  if (s.m() != A.m()) throw std::invalid_argument("gamma_sq: signal length must equal M");
  check_support_range(xi, A.m());
  const SupportSet diff = s.support.difference(xi);
  if (diff.empty()) return 0.0;

  SubsetFactor factor(A, xi);
  const Matrix a_diff = submatrix(A, diff);
  Matrix proj(a_diff.rows(), a_diff.cols());
  for (Eigen::Index j = 0; j < a_diff.cols(); ++j) {
    proj.col(j) = factor.residual_vector(a_diff.col(j));
  }
  const Eigen::MatrixXd gram = proj.transpose() * proj;

  const auto& idx = diff.indices();
  Vector coeffs(diff.k());
  for (std::size_t i = 0; i < idx.size(); ++i) coeffs[static_cast<Eigen::Index>(i)] = s.values[idx[i] - 1];
  const double value = coeffs.dot(gram * coeffs) / static_cast<double>(A.n());
  return std::max(value, 0.0);
}

}  // namespace jtcs
