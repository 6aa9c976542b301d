#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace jtcs {

// Sorted set of 1-based column indices. Range against a concrete matrix
// width is checked where the set meets a matrix.
class SupportSet {
 public:
  SupportSet() = default;

  explicit SupportSet(std::vector<int> indices) : indices_(std::move(indices)) {
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] < 1)
        throw std::invalid_argument("SupportSet: indices are 1-based and must be >= 1");
      if (i > 0 && indices_[i] <= indices_[i - 1])
        throw std::invalid_argument("SupportSet: indices must be strictly increasing");
    }
  }

  static SupportSet first_k(int k) {
    if (k < 0) throw std::invalid_argument("SupportSet::first_k: k must be >= 0");
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
    return SupportSet(std::move(idx));
  }

  int k() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  const std::vector<int>& indices() const { return indices_; }
  int max_index() const { return indices_.empty() ? 0 : indices_.back(); }

  bool contains(int index) const {
    return std::binary_search(indices_.begin(), indices_.end(), index);
  }

  std::vector<int> zero_based() const {
    std::vector<int> out(indices_.size());
    for (std::size_t i = 0; i < indices_.size(); ++i) out[i] = indices_[i] - 1;
    return out;
  }

  // Elements of *this not in other.
  SupportSet difference(const SupportSet& other) const {
    std::vector<int> out;
    std::set_difference(indices_.begin(), indices_.end(),
                        other.indices_.begin(), other.indices_.end(),
                        std::back_inserter(out));
    return SupportSet(std::move(out));
  }

  std::string to_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (i > 0) s += ",";
      s += std::to_string(indices_[i]);
    }
    return s + "}";
  }

  friend bool operator==(const SupportSet& a, const SupportSet& b) {
    return a.indices_ == b.indices_;
  }
  friend bool operator!=(const SupportSet& a, const SupportSet& b) {
    return !(a == b);
  }

 private:
  std::vector<int> indices_;
};

}  // namespace jtcs
