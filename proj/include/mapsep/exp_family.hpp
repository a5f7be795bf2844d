#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mapsep/common.hpp"
#include "mapsep/partition.hpp"

namespace mapsep {

// Natural parameters (chi, tau) of a conjugate prior in canonical form.
// Admissibility is model-specific; see ExpFamilyModel::in_domain.
struct NaturalParams {
  Eigen::VectorXd chi;
  Eigen::VectorXd tau;

  bool all_finite() const { return chi.allFinite() && tau.allFinite(); }
};

// Convex combination t*p1 + (1-t)*p2 of two parameter points.
inline NaturalParams mix(double t, const NaturalParams& p1, const NaturalParams& p2) {
  if (p1.chi.size() != p2.chi.size() || p1.tau.size() != p2.tau.size())
    throw usage_error("mix: parameter dimensions differ");
  return {t * p1.chi + (1.0 - t) * p2.chi, t * p1.tau + (1.0 - t) * p2.tau};
}

// n points in R^d, pairwise distinct. Immutable after construction.
class Dataset {
 public:
  explicit Dataset(Eigen::MatrixXd points) : pts_(std::move(points)) {
    if (pts_.rows() < 1 || pts_.cols() < 1)
      throw usage_error("Dataset: need at least one point and one dimension");
    if (!pts_.allFinite()) throw usage_error("Dataset: entries must be finite");
    for (Eigen::Index i = 0; i < pts_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < pts_.rows(); ++j)
        if ((pts_.row(i).array() == pts_.row(j).array()).all())
          throw usage_error("Dataset: points must be pairwise distinct (rows " +
                            std::to_string(i) + " and " + std::to_string(j) + ")");
  }

  int n() const { return static_cast<int>(pts_.rows()); }
  int dim() const { return static_cast<int>(pts_.cols()); }
  Eigen::VectorXd point(int i) const { return pts_.row(i).transpose(); }
  const Eigen::MatrixXd& points() const { return pts_; }

 private:
  Eigen::MatrixXd pts_;
};

// Contract satisfied by each concrete conjugate exponential-family model.
//
//   dim        observation dimension d
//   stat_dim   sufficient-statistic dimension p
//   tau_dim    dimension q of tau and of the per-observation step
//   suff_stat  T(x), length p
//   log_base   ln h(x)
//   tau_step   the vector added to tau once per observation
//   prior      natural parameters of the base distribution
//   log_partition        log normalizer A(chi, tau); throws model_error outside
//                        the admissible set
//   prior_log_partition  cached A at the prior
//   in_domain  admissibility predicate for (chi, tau)
template <class M>
concept ExpFamilyModel = requires(const M& m, const Eigen::VectorXd& x, const NaturalParams& p) {
  { m.dim() } -> std::convertible_to<int>;
  { m.stat_dim() } -> std::convertible_to<int>;
  { m.tau_dim() } -> std::convertible_to<int>;
  { m.suff_stat(x) } -> std::convertible_to<Eigen::VectorXd>;
  { m.log_base(x) } -> std::convertible_to<double>;
  { m.tau_step() } -> std::convertible_to<Eigen::VectorXd>;
  { m.prior() } -> std::convertible_to<NaturalParams>;
  { m.log_partition(p) } -> std::convertible_to<double>;
  { m.prior_log_partition() } -> std::convertible_to<double>;
  { m.in_domain(p) } -> std::convertible_to<bool>;
};

namespace detail {

// Validated copy of a subset, sorted ascending. Summation always runs in this
// canonical order so permuting the input cannot change the result bitwise.
inline std::vector<int> canonical_subset(std::span<const int> subset, int n) {
  if (subset.empty()) throw usage_error("subset must be nonempty");
  std::vector<int> idx(subset.begin(), subset.end());
  std::sort(idx.begin(), idx.end());
  if (idx.front() < 0 || idx.back() >= n) throw usage_error("subset index out of range");
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw usage_error("subset contains repeated indices");
  return idx;
}

}  // namespace detail

// Posterior update: chi + sum_{i in subset} T(x_i), tau + |subset| * tau_step.
template <ExpFamilyModel M>
NaturalParams posterior_params(const M& model, std::span<const int> subset, const Dataset& data) {
  const std::vector<int> idx = detail::canonical_subset(subset, data.n());
  NaturalParams post = model.prior();
  for (int i : idx) post.chi += model.suff_stat(data.point(i));
  post.tau += static_cast<double>(idx.size()) * model.tau_step();
  if (!model.in_domain(post))
    throw model_error("posterior_params: updated parameters left the admissible set");
  return post;
}

// Log marginal likelihood of one cluster:
//   sum_i ln h(x_i) + A(posterior) - A(prior).
template <ExpFamilyModel M>
double log_marginal(const M& model, std::span<const int> subset, const Dataset& data) {
  const std::vector<int> idx = detail::canonical_subset(subset, data.n());
  NaturalParams post = model.prior();
  double log_h = 0.0;
  for (int i : idx) {
    const Eigen::VectorXd x = data.point(i);
    post.chi += model.suff_stat(x);
    log_h += model.log_base(x);
  }
  post.tau += static_cast<double>(idx.size()) * model.tau_step();
  return log_h + model.log_partition(post) - model.prior_log_partition();
}

// Log marginal likelihood of the whole dataset under a partition: the sum of
// per-block marginals, blocks visited in canonical label order.
template <ExpFamilyModel M>
double log_marginal_partition(const M& model, const Partition& partition, const Dataset& data) {
  if (partition.size() != data.n())
    throw usage_error("log_marginal_partition: partition does not cover the dataset");
  double total = 0.0;
  for (const std::vector<int>& block : partition.blocks())
    total += log_marginal(model, block, data);
  return total;
}

// Rows are the sufficient statistics T(x_i) of every point.
template <ExpFamilyModel M>
Eigen::MatrixXd statistic_matrix(const M& model, const Dataset& data) {
  Eigen::MatrixXd t(data.n(), model.stat_dim());
  for (int i = 0; i < data.n(); ++i) t.row(i) = model.suff_stat(data.point(i)).transpose();
  return t;
}

}  // namespace mapsep
