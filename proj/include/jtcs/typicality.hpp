#pragma once

// Joint-typicality statistic and decision rule. A candidate support xi is
// typical with y when the normalized residual energy sits within eps of the
// noise-only value:  | (1/N)||P_perp y||^2 - ((N-K)/N) sigma_n^2 | < eps,
// with strict inequality.

#include <cmath>
#include <stdexcept>

#include "jtcs/projections.hpp"

namespace jtcs {

struct TypicalityParams {
  double sigma_n_sq = 1.0;  // noise variance
  double eps = 0.1;         // typicality slack, absolute, in signal^2 units

  void validate() const {
    if (sigma_n_sq < 0.0) throw std::invalid_argument("TypicalityParams: sigma_n_sq must be >= 0");
    if (!(eps > 0.0)) throw std::invalid_argument("TypicalityParams: eps must be > 0");
  }
};

inline double typicality_statistic_from_residual(double residual_sq, Eigen::Index N,
                                                 int K, double sigma_n_sq) {
  const double n = static_cast<double>(N);
  return std::abs(residual_sq / n - (n - static_cast<double>(K)) / n * sigma_n_sq);
}

inline double typicality_statistic(const MeasurementMatrix& A, const SupportSet& xi,
                                   const Vector& y, double sigma_n_sq) {
  if (xi.k() >= A.n()) throw std::invalid_argument("typicality_statistic: need K < N");
  const double residual = residual_sq_norm(A, xi, y);
  return typicality_statistic_from_residual(residual, A.n(), xi.k(), sigma_n_sq);
}

inline bool is_typical(const MeasurementMatrix& A, const SupportSet& xi,
                       const Vector& y, const TypicalityParams& params) {
  params.validate();
  return typicality_statistic(A, xi, y, params.sigma_n_sq) < params.eps;
}

}  // namespace jtcs
