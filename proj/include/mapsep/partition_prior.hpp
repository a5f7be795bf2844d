#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mapsep/common.hpp"
#include "mapsep/partition.hpp"

namespace mapsep {

// Exchangeable partition probability function: the log probability of a set
// partition as a function of the multiset of its block sizes only.
class EppfPrior {
 public:
  virtual ~EppfPrior() = default;
  virtual double log_eppf(const std::vector<int>& sizes) const = 0;

  double log_eppf(const Partition& p) const { return log_eppf(p.block_sizes()); }

 protected:
  // Shared validation; returns n. Sizes are sorted by callers so that the
  // result is bitwise independent of the order the multiset is presented in.
  static int checked_total(const std::vector<int>& sizes) {
    if (sizes.empty()) throw usage_error("log_eppf: empty size multiset");
    int n = 0;
    for (int s : sizes) {
      if (s < 1) throw usage_error("log_eppf: block sizes must be positive");
      n += s;
    }
    return n;
  }
};

// Chinese Restaurant Process with concentration alpha:
//   p_n(I) = alpha^{|I|} / alpha^{(n)} * prod_I (|I| - 1)!
// with the rising factorial alpha^{(n)} evaluated as lgamma(alpha+n) - lgamma(alpha).
class CrpPrior final : public EppfPrior {
 public:
  explicit CrpPrior(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw usage_error("CrpPrior: alpha must be positive and finite");
  }

  using EppfPrior::log_eppf;

  double alpha() const { return alpha_; }

  double log_eppf(const std::vector<int>& sizes) const override {
    const int n = checked_total(sizes);
    std::vector<int> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());
    double lp = static_cast<double>(sorted.size()) * std::log(alpha_);
    for (int s : sorted) lp += std::lgamma(static_cast<double>(s));
    lp += std::lgamma(alpha_) - std::lgamma(alpha_ + n);
    return lp;
  }

 private:
  double alpha_;
};

// Uniform distribution over all set partitions of [n]; exercises prior
// pluggability in tests.
class UniformPartitionPrior final : public EppfPrior {
 public:
  using EppfPrior::log_eppf;

  double log_eppf(const std::vector<int>& sizes) const override {
    const int n = checked_total(sizes);
    return -log_bell_number(n);
  }
};

// Sums exp(log_eppf) over every set partition of [n]. Validation helper; a
// proper EPPF must return 1 up to floating-point error.
inline double eppf_total_mass(const EppfPrior& prior, int n) {
  if (n < 1 || n > 12) throw usage_error("eppf_total_mass: n must be in [1, 12]");
  double total = 0.0;
  std::vector<int> counts;
  for_each_partition(n, [&](const std::vector<int>& rgs) {
    counts.assign(static_cast<std::size_t>(n), 0);
    int k = 0;
    for (int l : rgs) {
      ++counts[static_cast<std::size_t>(l)];
      k = std::max(k, l + 1);
    }
    counts.resize(static_cast<std::size_t>(k));
    total += std::exp(prior.log_eppf(counts));
  });
  return total;
}

}  // namespace mapsep
