#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "jtcs/ensembles.hpp"
#include "jtcs/support_set.hpp"

namespace jtcs {

// K-sparse signal of length M. `mu` is the smallest nonzero magnitude,
// recomputed from the values so the invariant mu = min_{i in supp} |s_i|
// holds by construction.
struct SparseSignal {
  Vector values;
  SupportSet support;
  double mu = 0.0;

  int m() const { return static_cast<int>(values.size()); }
  int k() const { return support.k(); }

  static SparseSignal from_values(Vector v) {
    std::vector<int> idx;
    double mu = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] != 0.0) {
        idx.push_back(static_cast<int>(i) + 1);
        mu = std::min(mu, std::abs(v[i]));
      }
    }
    if (idx.empty())
      throw std::invalid_argument("SparseSignal: at least one nonzero entry required");
    SparseSignal s;
    s.values = std::move(v);
    s.support = SupportSet(std::move(idx));
    s.mu = mu;
    return s;
  }

  // Nonzero values in support order, as a dense K-vector.
  Vector on_support() const {
    Vector out(support.k());
    const auto& idx = support.indices();
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[idx[i] - 1];
    return out;
  }
};

}  // namespace jtcs
