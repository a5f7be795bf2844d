#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "mapsep/exp_family.hpp"
#include "mapsep/models_normal.hpp"
#include "mapsep/oracle.hpp"

using namespace mapsep;

namespace {

FixedCovModel unit_fixed_1d() {
  return FixedCovModel({Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1),
                        Eigen::MatrixXd::Identity(1, 1)});
}

Dataset make_data(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return Dataset(m);
}

}  // namespace

TEST_CASE("dataset invariants") {
  Eigen::MatrixXd dup(2, 2);
  dup << 1, 2, 1, 2;
  CHECK_THROWS_AS(Dataset(dup), usage_error);
  Eigen::MatrixXd nan(1, 1);
  nan << std::nan("");
  CHECK_THROWS_AS(Dataset(nan), usage_error);
  CHECK_THROWS_AS(Dataset(Eigen::MatrixXd(0, 1)), usage_error);
  Eigen::MatrixXd ok(2, 2);
  ok << 1, 2, 1, 3;
  CHECK(Dataset(ok).n() == 2);
}

TEST_CASE("posterior update on a single zero observation") {
  FixedCovModel model = unit_fixed_1d();
  Dataset data = make_data({0.0});
  std::vector<int> s{0};
  NaturalParams post = posterior_params(model, s, data);
  CHECK(post.chi == model.prior().chi);  // T(0) = 0
  CHECK(post.tau == model.prior().tau + model.tau_step());
}

TEST_CASE("posterior update matches the NIW d=1 hand computation") {
  NiwModel model({Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 1.0, 1.0});
  Dataset data = make_data({2.0});
  std::vector<int> s{0};
  NaturalParams post = posterior_params(model, s, data);
  Eigen::VectorXd expected_chi = model.prior().chi + Eigen::Vector2d(-2.0, 2.0);
  CHECK(post.chi == expected_chi);
  CHECK(post.tau == model.prior().tau + Eigen::Vector2d(1.0, 1.0));
}

TEST_CASE("posterior update is additive over disjoint subsets") {
  NigModel model({Eigen::VectorXd::Constant(2, 0.5), Eigen::MatrixXd::Identity(2, 2),
                  2.0 * Eigen::MatrixXd::Identity(2, 2), 1.5});
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd pts(6, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = normal(rng);
  Dataset data(pts);

  std::vector<int> all{0, 1, 2, 3, 4, 5}, first{5, 0, 2}, second{1, 4, 3};
  NaturalParams joint = posterior_params(model, all, data);
  NaturalParams seq = model.prior();
  for (const std::vector<int>* part : {&first, &second}) {
    std::vector<int> idx = *part;
    std::sort(idx.begin(), idx.end());
    for (int i : idx) seq.chi += model.suff_stat(data.point(i));
    seq.tau += static_cast<double>(idx.size()) * model.tau_step();
  }
  CHECK((joint.chi - seq.chi).cwiseAbs().maxCoeff() <=
        1e-12 * (1.0 + joint.chi.cwiseAbs().maxCoeff()));
  CHECK((joint.tau - seq.tau).cwiseAbs().maxCoeff() <=
        1e-12 * (1.0 + joint.tau.cwiseAbs().maxCoeff()));
}

TEST_CASE("subset validation") {
  FixedCovModel model = unit_fixed_1d();
  Dataset data = make_data({0.0, 1.0});
  std::vector<int> empty;
  CHECK_THROWS_AS(posterior_params(model, empty, data), usage_error);
  std::vector<int> bad{2};
  CHECK_THROWS_AS(posterior_params(model, bad, data), usage_error);
  std::vector<int> repeated{0, 0};
  CHECK_THROWS_AS(log_marginal(model, repeated, data), usage_error);
}

TEST_CASE("log_marginal is bitwise invariant under subset order") {
  NiwModel model({Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 2.0, 3.0});
  Dataset data = make_data({-1.5, 0.25, 0.5, 2.75, 4.0});
  std::vector<int> subset{0, 1, 2, 3, 4};
  const double reference = log_marginal(model, subset, data);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(subset.begin(), subset.end(), rng);
    CHECK(log_marginal(model, subset, data) == reference);
  }
}

TEST_CASE("partition marginals match the quadrature oracle per block") {
  FixedCovModel model = unit_fixed_1d();
  Dataset data = make_data({0.0, 10.0});

  const double merged = oracle::quadrature_log_marginal(model.spec(), {0.0, 10.0}).log_value;
  CHECK(log_marginal_partition(model, Partition::one_block(2), data) ==
        Catch::Approx(merged).epsilon(1e-8));

  const double split = oracle::quadrature_log_marginal(model.spec(), {0.0}).log_value +
                       oracle::quadrature_log_marginal(model.spec(), {10.0}).log_value;
  CHECK(log_marginal_partition(model, Partition::singletons(2), data) ==
        Catch::Approx(split).epsilon(1e-8));
}

TEST_CASE("partition marginal decomposes into blocks") {
  FixedCovModel model = unit_fixed_1d();
  Dataset data = make_data({0.0, 10.0, -3.0});

  double singles = 0.0;
  for (int i = 0; i < 3; ++i) {
    std::vector<int> s{i};
    singles += log_marginal(model, s, data);
  }
  CHECK(log_marginal_partition(model, Partition::singletons(3), data) ==
        Catch::Approx(singles).epsilon(1e-15));

  std::vector<int> all{0, 1, 2};
  CHECK(log_marginal_partition(model, Partition::one_block(3), data) ==
        Catch::Approx(log_marginal(model, all, data)).epsilon(1e-15));

  CHECK_THROWS_AS(log_marginal_partition(model, Partition::one_block(2), data), usage_error);
}
