#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mapsep/common.hpp"

namespace mapsep {

// A set partition of {0..n-1} stored as a label vector in canonical form:
// block labels appear as 0,1,2,... in order of first occurrence. Construction
// canonicalizes arbitrary label vectors; canonicalization is idempotent.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<int> labels) { assign(std::move(labels)); }

  static Partition singletons(int n) {
    std::vector<int> l(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) l[static_cast<std::size_t>(i)] = i;
    return Partition(std::move(l));
  }
  static Partition one_block(int n) {
    return Partition(std::vector<int>(static_cast<std::size_t>(n), 0));
  }

  int size() const { return static_cast<int>(labels_.size()); }
  int num_blocks() const { return num_blocks_; }
  const std::vector<int>& labels() const { return labels_; }

  std::vector<std::vector<int>> blocks() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(num_blocks_));
    for (int i = 0; i < size(); ++i)
      out[static_cast<std::size_t>(labels_[static_cast<std::size_t>(i)])].push_back(i);
    return out;
  }

  std::vector<int> block_sizes() const {
    std::vector<int> s(static_cast<std::size_t>(num_blocks_), 0);
    for (int l : labels_) ++s[static_cast<std::size_t>(l)];
    return s;
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  void assign(std::vector<int> raw) {
    if (raw.empty()) throw usage_error("Partition: empty label vector");
    std::unordered_map<int, int> remap;
    remap.reserve(raw.size());
    labels_.resize(raw.size());
    int next = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto [it, fresh] = remap.emplace(raw[i], next);
      if (fresh) ++next;
      labels_[i] = it->second;
    }
    num_blocks_ = next;
  }

  std::vector<int> labels_;
  int num_blocks_ = 0;
};

// Bell numbers. Exact in 64 bits up to n = 25.
inline std::uint64_t bell_number(int n) {
  if (n < 0 || n > 25)
    throw usage_error("bell_number: exact value only available for 0 <= n <= 25");
  std::vector<std::uint64_t> row{1};
  for (int i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next;
    next.reserve(row.size() + 1);
    next.push_back(row.back());
    for (std::uint64_t v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

// ln Bell(n) via the Bell triangle in extended precision.
inline double log_bell_number(int n) {
  if (n < 0 || n > 256) throw usage_error("log_bell_number: n out of range");
  std::vector<long double> row{1.0L};
  for (int i = 0; i < n; ++i) {
    std::vector<long double> next;
    next.reserve(row.size() + 1);
    next.push_back(row.back());
    for (long double v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return static_cast<double>(std::log(row.front()));
}

// Enumerates every set partition of {0..n-1} exactly once, in lexicographic
// restricted-growth-string order. The visitor receives the RGS label vector,
// which is already in canonical form.
template <class F>
void for_each_partition(int n, F&& visit) {
  if (n < 1) throw usage_error("for_each_partition: n must be >= 1");
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::vector<int> pm(static_cast<std::size_t>(n), 0);  // pm[i] = max(a[0..i-1])
  for (;;) {
    visit(static_cast<const std::vector<int>&>(a));
    int i = n - 1;
    while (i > 0 && a[static_cast<std::size_t>(i)] > pm[static_cast<std::size_t>(i)]) --i;
    if (i == 0) break;
    ++a[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) {
      a[static_cast<std::size_t>(j)] = 0;
      pm[static_cast<std::size_t>(j)] =
          std::max(pm[static_cast<std::size_t>(j - 1)], a[static_cast<std::size_t>(j - 1)]);
    }
  }
}

}  // namespace mapsep
