#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "mapsep/exp_family.hpp"
#include "mapsep/fixtures.hpp"
#include "mapsep/models_normal.hpp"
#include "mapsep/oracle.hpp"

using namespace mapsep;

namespace {

Eigen::MatrixXd ident(int d, double s = 1.0) { return s * Eigen::MatrixXd::Identity(d, d); }

double log_student_t(double x, double mean, double scale_sq, double dof) {
  const double z = (x - mean) * (x - mean) / scale_sq;
  return std::lgamma(0.5 * (dof + 1)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi * scale_sq) -
         0.5 * (dof + 1) * std::log1p(z / dof);
}

}  // namespace

TEST_CASE("quadrature agrees with the analytic reductions") {
  // fixed: f_1 = N(x; mu0, sigma0 + psi0)
  FixedCovModel::Spec fixed{Eigen::VectorXd::Constant(1, 0.4), ident(1, 2.0), ident(1, 0.5)};
  auto qf = oracle::quadrature_log_marginal(fixed, {1.1});
  const double expected_fixed =
      -0.5 * (std::log(2 * std::numbers::pi * 2.5) + (1.1 - 0.4) * (1.1 - 0.4) / 2.5);
  CHECK(qf.log_value == Catch::Approx(expected_fixed).epsilon(1e-7));

  // NIW: f_1 = t_{nu0+2}(mu0, nu0 sigma0 (kappa0+1)/(kappa0 (nu0+2)))
  NiwModel::Spec niw{Eigen::VectorXd::Constant(1, -0.2), ident(1, 1.2), 1.4, 2.5};
  auto qw = oracle::quadrature_log_marginal(niw, {0.9});
  const double dof_w = niw.nu0 + 2.0;
  const double scale_w = niw.nu0 * 1.2 * (niw.kappa0 + 1.0) / (niw.kappa0 * dof_w);
  CHECK(qw.log_value == Catch::Approx(log_student_t(0.9, -0.2, scale_w, dof_w)).epsilon(1e-7));

  // NIG: f_1 = t_{2(beta0+1)}(mu0, beta0 (psi0 + sigma0)/(beta0+1))
  NigModel::Spec nig{Eigen::VectorXd::Constant(1, 0.1), ident(1, 0.7), ident(1, 1.6), 2.2};
  auto qg = oracle::quadrature_log_marginal(nig, {-0.5});
  const double dof_g = 2.0 * (nig.beta0 + 1.0);
  const double scale_g = nig.beta0 * (0.7 + 1.6) / (nig.beta0 + 1.0);
  CHECK(qg.log_value == Catch::Approx(log_student_t(-0.5, 0.1, scale_g, dof_g)).epsilon(1e-7));
}

TEST_CASE("frozen fixtures regenerate") {
  for (const auto& f : fixtures::marginal_fixtures()) {
    INFO(f.name);
    auto r = fixtures::rerun_oracle(f);
    CHECK(std::abs(r.log_value - f.log_marginal) < 1e-7 * std::abs(f.log_marginal));
    CHECK(r.rel_error < 1e-8);
  }
}

TEST_CASE("halving the tolerance moves the result less than the estimate") {
  NiwModel::Spec niw{Eigen::VectorXd::Zero(1), ident(1), 1.0, 2.0};
  const std::vector<double> xs{-1.2, 0.3, 0.4, 2.0};
  oracle::QuadratureSpec loose;
  loose.rel_tol = 1e-6;
  oracle::QuadratureSpec tight = loose;
  tight.rel_tol = 5e-7;
  auto a = oracle::quadrature_log_marginal(niw, xs, loose);
  auto b = oracle::quadrature_log_marginal(niw, xs, tight);
  CHECK(std::abs(a.log_value - b.log_value) <= a.rel_error + 1e-12);
}

TEST_CASE("oracle rejects unsupported shapes") {
  FixedCovModel::Spec fixed{Eigen::VectorXd::Zero(2), ident(2), ident(2)};
  CHECK_THROWS_AS(oracle::quadrature_log_marginal(fixed, {0.0}), usage_error);
  FixedCovModel::Spec ok{Eigen::VectorXd::Zero(1), ident(1), ident(1)};
  CHECK_THROWS_AS(oracle::quadrature_log_marginal(ok, {}), usage_error);
  CHECK_THROWS_AS(oracle::quadrature_log_marginal(ok, {1, 2, 3, 4, 5, 6, 7}), usage_error);
}

TEST_CASE("Monte-Carlo oracle brackets the closed forms at d=2") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0.3, -0.1, 1.2, 0.8, -0.9, 0.4;
  Dataset data(pts);
  std::vector<int> all{0, 1, 2};
  const int draws = 400000;

  NiwModel niw({Eigen::VectorXd::Zero(2), ident(2, 1.2), 1.5, 4.0});
  auto mc_w = oracle::mc_log_marginal(niw, pts, 99, draws);
  CHECK(std::abs(mc_w.log_value - log_marginal(niw, all, data)) < 4.0 * mc_w.log_std_error);

  FixedCovModel fixed({Eigen::VectorXd::Zero(2), ident(2, 1.5), ident(2, 0.8)});
  auto mc_f = oracle::mc_log_marginal(fixed, pts, 99, draws);
  CHECK(std::abs(mc_f.log_value - log_marginal(fixed, all, data)) < 4.0 * mc_f.log_std_error);

  NigModel nig({Eigen::VectorXd::Zero(2), ident(2, 1.1), ident(2, 0.9), 2.0});
  auto mc_g = oracle::mc_log_marginal(nig, pts, 99, draws);
  CHECK(std::abs(mc_g.log_value - log_marginal(nig, all, data)) < 4.0 * mc_g.log_std_error);
}

TEST_CASE("brute-force split enumeration") {
  int evaluated = 0;
  const auto count_objective = [&](const std::vector<int>&) {
    ++evaluated;
    return 0.0;  // constant: tie-break must give the lexicographically first
  };
  std::vector<int> u{3, 1, 4, 2};
  auto best = oracle::brute_force_best_split(count_objective, u, 2);
  CHECK(evaluated == 6);
  CHECK(best == std::vector<int>{1, 2});

  const auto sum_objective = [](const std::vector<int>& subset) {
    double s = 0;
    for (int i : subset) s += i;
    return s;
  };
  CHECK(oracle::brute_force_best_split(sum_objective, u, 2) == std::vector<int>{3, 4});
  CHECK_THROWS_AS(oracle::brute_force_best_split(sum_objective, u, 0), usage_error);

  std::vector<int> large(64);
  for (int i = 0; i < 64; ++i) large[static_cast<std::size_t>(i)] = i;
  CHECK_THROWS_AS(oracle::brute_force_best_split(sum_objective, large, 32), usage_error);
}

TEST_CASE("convexity probe") {
  NiwModel niw({Eigen::VectorXd::Zero(1), ident(1), 1.0, 2.0});
  Eigen::MatrixXd pts(4, 1);
  pts << -1.0, 0.2, 0.9, 2.5;
  Dataset data(pts);
  std::vector<int> s1{0, 1}, s2{2, 3};
  NaturalParams p1 = posterior_params(niw, s1, data);
  NaturalParams p2 = posterior_params(niw, s2, data);

  CHECK_THROWS_AS(oracle::convexity_probe(niw, p1, p1, 0.5), usage_error);
  CHECK_THROWS_AS(oracle::convexity_probe(niw, p1, p2, 1.0), usage_error);

  const double slack = oracle::convexity_probe(niw, p1, p2, 0.5);
  CHECK(slack > 1e-12);
  // The slack vanishes continuously at the ends of the segment.
  CHECK(oracle::convexity_probe(niw, p1, p2, 1e-6) < slack);
  CHECK(oracle::convexity_probe(niw, p1, p2, 1e-6) < 1e-3 * (1.0 + std::abs(slack)));
}

TEST_CASE("convexity probe over random admissible pairs, all models") {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> pick(0, 5);
  Eigen::MatrixXd pts(6, 1);
  pts << -2.1, -0.7, 0.1, 0.6, 1.4, 3.2;
  Dataset data(pts);

  const auto run = [&](const auto& model) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> a{pick(rng)}, b{pick(rng)};
      if (a[0] == b[0]) continue;
      NaturalParams p1 = posterior_params(model, a, data);
      NaturalParams p2 = posterior_params(model, b, data);
      const double t = 0.25 + 0.5 * std::uniform_real_distribution<double>()(rng);
      CHECK(oracle::convexity_probe(model, p1, p2, t) > 1e-12);
    }
  };
  run(NiwModel({Eigen::VectorXd::Zero(1), ident(1), 1.0, 2.0}));
  run(FixedCovModel({Eigen::VectorXd::Zero(1), ident(1, 1.5), ident(1, 0.7)}));
  run(NigModel({Eigen::VectorXd::Zero(1), ident(1), ident(1), 1.5}));
}
