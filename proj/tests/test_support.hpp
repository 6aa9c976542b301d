#pragma once

// Shared oracles and generators for the test suite. The projector oracle
// deliberately goes through the explicit Gram inverse, independent of the
// QR path used by the library.

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "jtcs/ensembles.hpp"
#include "jtcs/rng.hpp"

namespace jtcs_test {

using jtcs::Matrix;
using jtcs::Vector;

// P = A (A^T A)^{-1} A^T via explicit inversion.
inline Eigen::MatrixXd explicit_projector(const Matrix& a) {
  const Eigen::MatrixXd gram = a.transpose() * a;
  return a * gram.inverse() * a.transpose();
}

inline Eigen::MatrixXd explicit_complement(const Matrix& a) {
  return Eigen::MatrixXd::Identity(a.rows(), a.rows()) - explicit_projector(a);
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline jtcs::MeasurementMatrix synthetic_matrix(Matrix entries) {
  jtcs::MeasurementMatrix A;
  A.entries = std::move(entries);
  A.kind = jtcs::EnsembleKind::GaussianUnit;
  A.seed = 0;
  return A;
}

inline Vector random_unit_gaussian(std::uint64_t key, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = jtcs::rng::gaussian_at(key, static_cast<std::uint64_t>(i));
  return v;
}

}  // namespace jtcs_test
