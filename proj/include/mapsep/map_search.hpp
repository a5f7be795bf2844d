#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mapsep/common.hpp"
#include "mapsep/exp_family.hpp"
#include "mapsep/partition.hpp"
#include "mapsep/partition_prior.hpp"

namespace mapsep {

enum class SearchMethod { exhaustive, local };

inline const char* to_string(SearchMethod m) {
  return m == SearchMethod::exhaustive ? "exhaustive" : "local";
}

struct ScoredPartition {
  Partition partition;
  double log_prior = 0.0;
  double log_lik = 0.0;
  double log_post = 0.0;
  // Co-optimal partitions within the tie tolerance (the winner excluded).
  std::vector<Partition> ties;
};

struct SearchReport {
  ScoredPartition best;
  std::uint64_t visited = 0;
  SearchMethod method = SearchMethod::exhaustive;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Objective of Bayesian MAP clustering: log EPPF plus the sum of per-block
// log marginal likelihoods.
template <ExpFamilyModel M>
ScoredPartition score_partition(const M& model, const EppfPrior& prior, const Dataset& data,
                                const Partition& partition) {
  if (partition.size() != data.n())
    throw usage_error("score_partition: partition does not cover the dataset");
  ScoredPartition s;
  s.partition = partition;
  s.log_prior = prior.log_eppf(partition);
  s.log_lik = log_marginal_partition(model, partition, data);
  s.log_post = s.log_prior + s.log_lik;
  return s;
}

struct ExhaustiveOptions {
  int max_points = 12;
  double tie_tolerance = 1e-9;
  int tie_limit = 64;
  bool collect_ties = true;
  unsigned threads = 1;
};

namespace detail {

// Log marginal of every nonempty index subset, keyed by bitmask. Statistic
// sums run over ascending indices (= ascending set bits), matching the
// canonical order used by log_marginal.
template <ExpFamilyModel M>
std::vector<double> subset_log_marginals(const M& model, const Dataset& data) {
  const int n = data.n();
  std::vector<Eigen::VectorXd> stats(static_cast<std::size_t>(n));
  std::vector<double> log_h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    stats[static_cast<std::size_t>(i)] = model.suff_stat(data.point(i));
    log_h[static_cast<std::size_t>(i)] = model.log_base(data.point(i));
  }
  const NaturalParams& prior = model.prior();
  std::vector<double> table(std::size_t{1} << n, 0.0);
  NaturalParams post;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    post = prior;
    double lh = 0.0;
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        post.chi += stats[static_cast<std::size_t>(i)];
        lh += log_h[static_cast<std::size_t>(i)];
        ++k;
      }
    }
    post.tau += static_cast<double>(k) * model.tau_step();
    table[mask] = lh + model.log_partition(post) - model.prior_log_partition();
  }
  return table;
}

// Score of one restricted growth string against the subset table.
inline double rgs_score(const std::vector<int>& rgs, const std::vector<double>& table,
                        const EppfPrior& prior, std::vector<std::uint32_t>& mask_buf,
                        std::vector<int>& size_buf) {
  mask_buf.assign(rgs.size(), 0);
  size_buf.assign(rgs.size(), 0);
  int k = 0;
  for (std::size_t i = 0; i < rgs.size(); ++i) {
    const int l = rgs[i];
    mask_buf[static_cast<std::size_t>(l)] |= (1u << i);
    ++size_buf[static_cast<std::size_t>(l)];
    k = std::max(k, l + 1);
  }
  double log_lik = 0.0;
  for (int b = 0; b < k; ++b) log_lik += table[mask_buf[static_cast<std::size_t>(b)]];
  size_buf.resize(static_cast<std::size_t>(k));
  return prior.log_eppf(size_buf) + log_lik;
}

struct ChunkBest {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<int> rgs;
  std::uint64_t visited = 0;
};

}  // namespace detail

// Global MAP by enumeration of all set partitions. Ties on the score are
// resolved to the lexicographically smallest restricted growth string; every
// partition within tie_tolerance of the optimum is reported in `ties`.
// With threads > 1 the stream is scored in fixed-size chunks whose results
// are reduced in chunk order, so the outcome is schedule-independent.
template <ExpFamilyModel M>
SearchReport exhaustive_map(const M& model, const EppfPrior& prior, const Dataset& data,
                            const ExhaustiveOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = data.n();
  if (opts.max_points > 20)
    throw usage_error("exhaustive_map: cap above 20 points is not supported");
  if (n > opts.max_points)
    throw usage_error("exhaustive_map: n = " + std::to_string(n) + " exceeds cap " +
                      std::to_string(opts.max_points) + " (about " +
                      std::to_string(bell_number(std::min(n, 25))) + " partitions)");

  const std::vector<double> table = detail::subset_log_marginals(model, data);

  detail::ChunkBest best;
  if (opts.threads <= 1) {
    std::vector<std::uint32_t> mask_buf;
    std::vector<int> size_buf;
    for_each_partition(n, [&](const std::vector<int>& rgs) {
      const double s = detail::rgs_score(rgs, table, prior, mask_buf, size_buf);
      ++best.visited;
      if (s > best.score) {
        best.score = s;
        best.rgs = rgs;
      }
    });
  } else {
    constexpr std::size_t chunk_size = 8192;
    auto run_chunk = [&](std::vector<std::vector<int>> chunk) {
      detail::ChunkBest local;
      std::vector<std::uint32_t> mask_buf;
      std::vector<int> size_buf;
      for (const std::vector<int>& rgs : chunk) {
        const double s = detail::rgs_score(rgs, table, prior, mask_buf, size_buf);
        ++local.visited;
        if (s > local.score) {
          local.score = s;
          local.rgs = rgs;
        }
      }
      return local;
    };
    std::vector<std::future<detail::ChunkBest>> futures;
    std::vector<std::vector<int>> chunk;
    chunk.reserve(chunk_size);
    for_each_partition(n, [&](const std::vector<int>& rgs) {
      chunk.push_back(rgs);
      if (chunk.size() == chunk_size) {
        futures.push_back(std::async(std::launch::async, run_chunk, std::move(chunk)));
        chunk.clear();
        chunk.reserve(chunk_size);
      }
    });
    if (!chunk.empty())
      futures.push_back(std::async(std::launch::async, run_chunk, std::move(chunk)));
    // Reduction in chunk order: strictly better wins, equal scores keep the
    // earlier (lexicographically smaller) string.
    for (std::future<detail::ChunkBest>& f : futures) {
      detail::ChunkBest local = f.get();
      best.visited += local.visited;
      if (local.score > best.score) {
        best.score = local.score;
        best.rgs = std::move(local.rgs);
      }
    }
  }

  SearchReport report;
  report.method = SearchMethod::exhaustive;
  report.visited = best.visited;
  report.best = score_partition(model, prior, data, Partition(best.rgs));

  if (opts.collect_ties) {
    std::vector<std::uint32_t> mask_buf;
    std::vector<int> size_buf;
    for_each_partition(n, [&](const std::vector<int>& rgs) {
      if (static_cast<int>(report.best.ties.size()) >= opts.tie_limit) return;
      if (rgs == best.rgs) return;
      const double s = detail::rgs_score(rgs, table, prior, mask_buf, size_buf);
      if (std::abs(s - best.score) < opts.tie_tolerance)
        report.best.ties.emplace_back(Partition(rgs));
    });
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct SplitLimits {
  int max_block = 20;
  std::uint64_t max_candidates = 1'000'000;
};

namespace detail {

inline std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (int i = 1; i <= k; ++i) {
    // c * (n - k + i) / i stays integral at every step
    if (c > cap) return cap + 1;
    c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return std::min(c, cap + 1);
}

}  // namespace detail

// Exact best k-subset of a block: maximizes
//   ln f_k(x_I) + ln f_{|U|-k}(x_{U \ I})
// by enumerating all k-subsets in lexicographic order (ties keep the first,
// i.e. lexicographically smallest, subset).
template <ExpFamilyModel M>
std::vector<int> best_split(const M& model, const Dataset& data, std::span<const int> block,
                            int k, const SplitLimits& limits = {}) {
  std::vector<int> u(block.begin(), block.end());
  std::sort(u.begin(), u.end());
  const int s = static_cast<int>(u.size());
  if (k < 1 || k >= s) throw usage_error("best_split: need 1 <= k < |block|");
  if (s > limits.max_block)
    throw usage_error("best_split: block larger than cap " + std::to_string(limits.max_block));
  if (detail::binomial_capped(s, k, limits.max_candidates) > limits.max_candidates)
    throw usage_error("best_split: C(|block|, k) exceeds the candidate cap");

  std::vector<int> pos(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pos[static_cast<std::size_t>(i)] = i;
  std::vector<int> best_subset;
  double best_obj = -std::numeric_limits<double>::infinity();
  std::vector<int> subset(static_cast<std::size_t>(k)), rest;
  for (;;) {
    subset.clear();
    rest.clear();
    int next = 0;
    for (int i = 0; i < s; ++i) {
      if (next < k && pos[static_cast<std::size_t>(next)] == i) {
        subset.push_back(u[static_cast<std::size_t>(i)]);
        ++next;
      } else {
        rest.push_back(u[static_cast<std::size_t>(i)]);
      }
    }
    const double obj = log_marginal(model, subset, data) + log_marginal(model, rest, data);
    if (obj > best_obj) {
      best_obj = obj;
      best_subset = subset;
    }
    // advance combination odometer
    int i = k - 1;
    while (i >= 0 && pos[static_cast<std::size_t>(i)] == s - k + i) --i;
    if (i < 0) break;
    ++pos[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best_subset;
}

namespace detail {

// Ordering of statistic vectors by decreasing inner product with `direction`.
// If two keys collide exactly the direction is perturbed deterministically;
// identical statistic vectors (impossible for distinct data under the shipped
// models) fall back to index order.
inline std::vector<int> directional_order(const Eigen::MatrixXd& stats,
                                          const Eigen::VectorXd& direction) {
  const int n = static_cast<int>(stats.rows());
  Eigen::VectorXd v = direction;
  std::uint64_t noise_state = 0x7c0ffee123456789ull;
  for (int attempt = 0; attempt < 32; ++attempt) {
    Eigen::VectorXd keys = stats * v;
    std::vector<double> sorted_keys(keys.data(), keys.data() + n);
    std::sort(sorted_keys.begin(), sorted_keys.end());
    if (std::adjacent_find(sorted_keys.begin(), sorted_keys.end()) == sorted_keys.end()) {
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) { return keys(a) > keys(b); });
      return order;
    }
    const double scale = 1e-9 * std::max(1.0, v.norm());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v(i) += scale * (2.0 * uniform_from_bits(splitmix64(noise_state)) - 1.0);
  }
  Eigen::VectorXd keys = stats * v;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys(a) > keys(b); });
  return order;
}

}  // namespace detail

// Top-k rows by inner product with `direction`, as ascending row indices.
inline std::vector<int> directional_split(const Eigen::MatrixXd& stats,
                                          const Eigen::VectorXd& direction, int k) {
  const int n = static_cast<int>(stats.rows());
  if (k < 1 || k > n) throw usage_error("directional_split: need 1 <= k <= n");
  if (direction.size() != stats.cols())
    throw usage_error("directional_split: direction dimension mismatch");
  std::vector<int> order = detail::directional_order(stats, direction);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

struct LocalSearchOptions {
  int pairwise_direction_cap = 30;  // use pairwise differences only up to this block size
  int direction_cap = 500;
  double min_gain = 1e-12;
};

// Hill climbing over single-point reassignments, block merges, and block
// splits along candidate directions (random unit vectors plus normalized
// pairwise statistic differences). Deterministic given the seed; never worse
// than the all-singletons and one-block baselines. `budget` caps the number
// of accepted moves; 0 returns the better baseline unchanged.
template <ExpFamilyModel M>
SearchReport local_search(const M& model, const EppfPrior& prior, const Dataset& data,
                          std::uint64_t seed, int budget, const LocalSearchOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (budget < 0) throw usage_error("local_search: budget must be nonnegative");
  const int n = data.n();
  const int p = model.stat_dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  const Eigen::MatrixXd stats = statistic_matrix(model, data);
  std::uint64_t visited = 0;

  const auto block_logf = [&](const std::vector<int>& idx) {
    return log_marginal(model, idx, data);
  };
  const auto prior_of = [&](std::vector<int> sizes) { return prior.log_eppf(sizes); };

  // State: blocks with cached per-block marginals.
  std::vector<std::vector<int>> blocks;
  std::vector<double> logf;
  double log_prior = 0.0, total = 0.0;
  const auto recompute_total = [&]() {
    std::vector<int> sizes;
    for (const std::vector<int>& b : blocks) sizes.push_back(static_cast<int>(b.size()));
    log_prior = prior_of(sizes);
    total = log_prior;
    for (double f : logf) total += f;
  };
  const auto load_partition = [&](const Partition& part) {
    blocks = part.blocks();
    logf.clear();
    for (const std::vector<int>& b : blocks) logf.push_back(block_logf(b));
    recompute_total();
  };

  const ScoredPartition singles = score_partition(model, prior, data, Partition::singletons(n));
  const ScoredPartition merged = score_partition(model, prior, data, Partition::one_block(n));
  visited += 2;
  load_partition(singles.log_post >= merged.log_post ? singles.partition : merged.partition);

  struct Candidate {
    double gain = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<int>> new_blocks;  // replacement for the touched blocks
    std::vector<int> removed;                  // indices of touched blocks, ascending
  };

  int accepted = 0;
  while (accepted < budget) {
    Candidate best;
    std::vector<int> sizes;
    for (const std::vector<int>& b : blocks) sizes.push_back(static_cast<int>(b.size()));
    const int num_blocks = static_cast<int>(blocks.size());

    const auto consider = [&](double gain, std::vector<int> removed,
                              std::vector<std::vector<int>> replacement) {
      ++visited;
      if (gain > best.gain) {
        best.gain = gain;
        best.removed = std::move(removed);
        best.new_blocks = std::move(replacement);
      }
    };

    // Single-point reassignment, including moves into a fresh singleton block.
    for (int src = 0; src < num_blocks; ++src) {
      const std::vector<int>& b_src = blocks[static_cast<std::size_t>(src)];
      for (std::size_t pos = 0; pos < b_src.size(); ++pos) {
        const int point = b_src[pos];
        std::vector<int> src_rest = b_src;
        src_rest.erase(src_rest.begin() + static_cast<std::ptrdiff_t>(pos));
        const double src_rest_logf = src_rest.empty() ? 0.0 : block_logf(src_rest);
        for (int dst = 0; dst <= num_blocks; ++dst) {
          if (dst == src) continue;
          const bool fresh = dst == num_blocks;
          if (fresh && b_src.size() == 1) continue;  // no-op
          std::vector<int> dst_new;
          if (!fresh) dst_new = blocks[static_cast<std::size_t>(dst)];
          dst_new.insert(std::lower_bound(dst_new.begin(), dst_new.end(), point), point);

          std::vector<int> new_sizes;
          for (int c = 0; c < num_blocks; ++c) {
            int sz = sizes[static_cast<std::size_t>(c)];
            if (c == src) --sz;
            if (c == dst) ++sz;
            if (sz > 0) new_sizes.push_back(sz);
          }
          if (fresh) new_sizes.push_back(1);

          double new_part = src_rest_logf + block_logf(dst_new);
          double old_part = logf[static_cast<std::size_t>(src)] +
                            (fresh ? 0.0 : logf[static_cast<std::size_t>(dst)]);
          double gain = (prior_of(new_sizes) - log_prior) + (new_part - old_part);

          std::vector<std::vector<int>> repl;
          if (!src_rest.empty()) repl.push_back(src_rest);
          repl.push_back(dst_new);
          std::vector<int> removed{src};
          if (!fresh) removed.push_back(dst);
          std::sort(removed.begin(), removed.end());
          consider(gain, std::move(removed), std::move(repl));
        }
      }
    }

    // Block merges.
    for (int c1 = 0; c1 < num_blocks; ++c1) {
      for (int c2 = c1 + 1; c2 < num_blocks; ++c2) {
        std::vector<int> merged_block;
        std::merge(blocks[static_cast<std::size_t>(c1)].begin(),
                   blocks[static_cast<std::size_t>(c1)].end(),
                   blocks[static_cast<std::size_t>(c2)].begin(),
                   blocks[static_cast<std::size_t>(c2)].end(), std::back_inserter(merged_block));
        std::vector<int> new_sizes;
        for (int c = 0; c < num_blocks; ++c)
          if (c != c1 && c != c2) new_sizes.push_back(sizes[static_cast<std::size_t>(c)]);
        new_sizes.push_back(static_cast<int>(merged_block.size()));
        double gain = (prior_of(new_sizes) - log_prior) + block_logf(merged_block) -
                      logf[static_cast<std::size_t>(c1)] - logf[static_cast<std::size_t>(c2)];
        consider(gain, {c1, c2}, {merged_block});
      }
    }

    // Block splits along candidate directions, every cut depth at once via
    // prefix sums of the sufficient statistics.
    for (int c = 0; c < num_blocks; ++c) {
      const std::vector<int>& u = blocks[static_cast<std::size_t>(c)];
      const int s = static_cast<int>(u.size());
      if (s < 2) continue;
      Eigen::MatrixXd bstats(s, p);
      for (int i = 0; i < s; ++i) bstats.row(i) = stats.row(u[static_cast<std::size_t>(i)]);

      std::vector<Eigen::VectorXd> directions;
      for (int r = 0; r < 2 * p; ++r) {
        Eigen::VectorXd v(p);
        for (int j = 0; j < p; ++j) v(j) = normal(rng);
        const double norm = v.norm();
        if (norm > 0) directions.push_back(v / norm);
      }
      if (s <= opts.pairwise_direction_cap) {
        for (int i = 0; i < s && static_cast<int>(directions.size()) < opts.direction_cap; ++i)
          for (int j = i + 1; j < s && static_cast<int>(directions.size()) < opts.direction_cap;
               ++j) {
            Eigen::VectorXd diff = bstats.row(i) - bstats.row(j);
            const double norm = diff.norm();
            if (norm > 0) directions.push_back(diff / norm);
          }
      }

      std::vector<int> new_sizes_base;
      for (int c2 = 0; c2 < num_blocks; ++c2)
        if (c2 != c) new_sizes_base.push_back(sizes[static_cast<std::size_t>(c2)]);

      for (const Eigen::VectorXd& v : directions) {
        const std::vector<int> order = detail::directional_order(bstats, v);
        Eigen::VectorXd chi_prefix = Eigen::VectorXd::Zero(p);
        double logh_prefix = 0.0;
        double logh_total = 0.0;
        for (int i = 0; i < s; ++i)
          logh_total += model.log_base(data.point(u[static_cast<std::size_t>(i)]));

        Eigen::VectorXd chi_total = Eigen::VectorXd::Zero(p);
        for (int i = 0; i < s; ++i)
          chi_total += bstats.row(order[static_cast<std::size_t>(i)]).transpose();

        for (int k = 1; k < s; ++k) {
          const int point = u[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])];
          chi_prefix += stats.row(point).transpose();
          logh_prefix += model.log_base(data.point(point));

          NaturalParams head = model.prior();
          head.chi += chi_prefix;
          head.tau += static_cast<double>(k) * model.tau_step();
          NaturalParams tail = model.prior();
          tail.chi += chi_total - chi_prefix;
          tail.tau += static_cast<double>(s - k) * model.tau_step();
          const double split_logf = logh_prefix + model.log_partition(head) -
                                    model.prior_log_partition() + (logh_total - logh_prefix) +
                                    model.log_partition(tail) - model.prior_log_partition();

          std::vector<int> new_sizes = new_sizes_base;
          new_sizes.push_back(k);
          new_sizes.push_back(s - k);
          const double gain = (prior_of(new_sizes) - log_prior) + split_logf -
                              logf[static_cast<std::size_t>(c)];
          if (gain > best.gain) {
            std::vector<int> head_idx, tail_idx;
            for (int i = 0; i < s; ++i) {
              const int idx = u[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
              (i < k ? head_idx : tail_idx).push_back(idx);
            }
            std::sort(head_idx.begin(), head_idx.end());
            std::sort(tail_idx.begin(), tail_idx.end());
            consider(gain, {c}, {head_idx, tail_idx});
          } else {
            ++visited;
          }
        }
      }
    }

    if (best.gain <= opts.min_gain) break;

    // Apply: drop touched blocks, append replacements, refresh caches.
    for (auto it = best.removed.rbegin(); it != best.removed.rend(); ++it) {
      blocks.erase(blocks.begin() + *it);
      logf.erase(logf.begin() + *it);
    }
    for (std::vector<int>& nb : best.new_blocks) {
      logf.push_back(block_logf(nb));
      blocks.push_back(std::move(nb));
    }
    recompute_total();
    ++accepted;
  }

  // Canonical rescoring; keep the better of the result and the baselines so
  // the contract holds bit-for-bit.
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (std::size_t c = 0; c < blocks.size(); ++c)
    for (int i : blocks[c]) labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
  ScoredPartition result = score_partition(model, prior, data, Partition(labels));
  if (singles.log_post > result.log_post) result = singles;
  if (merged.log_post > result.log_post) result = merged;

  SearchReport report;
  report.best = std::move(result);
  report.visited = visited;
  report.method = SearchMethod::local;
  report.seed = seed;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace mapsep
