#pragma once

// Independent brute-force and quadrature oracles. Everything here works from
// the generative definition of the models (raw densities and integrals) and
// deliberately avoids the closed-form log-partition code paths it is used to
// validate.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mapsep/common.hpp"
#include "mapsep/exp_family.hpp"
#include "mapsep/models_normal.hpp"

namespace mapsep::oracle {

struct QuadratureSpec {
  double rel_tol = 1e-8;
  int max_depth = 15;
  double tail_epsilon = 1e-12;  // prior mass allowed outside the scale bounds
  double log_pad = 3.0;         // extra padding of the log-scale bounds
  double mean_window = 12.0;    // half-width of location bounds, in stddevs
};

struct QuadratureResult {
  double log_value = 0.0;
  double rel_error = 0.0;
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double var) {
  return -0.5 * ((mapsep::detail::log_two_pi + std::log(var)) + (x - mean) * (x - mean) / var);
}

inline double log_inverse_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

// Integrates exp(log_f) over [lo, hi] with the integrand rescaled by its
// maximum on a coarse grid, so the working values stay near unity.
// Returns (log integral, relative error estimate).
template <class LogF>
std::pair<double, double> log_integrate(LogF&& log_f, double lo, double hi, double rel_tol,
                                        int max_depth) {
  constexpr int grid = 129;
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double x = lo + (hi - lo) * i / (grid - 1);
    peak = std::max(peak, log_f(x));
  }
  if (!std::isfinite(peak))
    throw solver_error("oracle quadrature: integrand has no finite values on the grid");
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&](double x) { return std::exp(log_f(x) - peak); }, lo, hi, max_depth, rel_tol, &err);
  if (!(value > 0.0)) throw solver_error("oracle quadrature: nonpositive integral");
  return {peak + std::log(value), err / value};
}

struct ScaleMixture {
  double ig_shape = 1.0;       // prior scale ~ InverseGamma(shape, scale)
  double ig_scale = 1.0;
  double mu0 = 0.0;
  double mean_var_factor = 1.0;  // Var(mu | lambda) = lambda * mean_var_factor
  double obs_var_factor = 1.0;   // Var(x | mu, lambda) = lambda * obs_var_factor
};

// f_k(x) = int IG(l) int N(mu; mu0, l*pv) prod_i N(x_i; mu, l*ov) dmu dl,
// with the scale integrated on a log grid.
inline QuadratureResult scale_mixture_log_marginal(const ScaleMixture& m,
                                                   const std::vector<double>& xs,
                                                   const QuadratureSpec& q) {
  const int k = static_cast<int>(xs.size());

  // Scale bounds: prior quantiles, widened toward the likelihood-weighted
  // region (larger shape from k observations, larger scale from spread data).
  double spread = 0.0;
  for (double x : xs) spread += (x - m.mu0) * (x - m.mu0);
  spread /= m.obs_var_factor;
  using boost::math::inverse_gamma_distribution;
  const inverse_gamma_distribution<double> prior_ig(m.ig_shape, m.ig_scale);
  const inverse_gamma_distribution<double> sharp_ig(m.ig_shape + 0.5 * k + 1.0, m.ig_scale);
  const inverse_gamma_distribution<double> wide_ig(m.ig_shape, m.ig_scale + 0.5 * spread);
  const double lam_lo =
      std::min(quantile(prior_ig, q.tail_epsilon), quantile(sharp_ig, q.tail_epsilon));
  const double lam_hi = std::max(quantile(prior_ig, 1.0 - q.tail_epsilon),
                                 quantile(wide_ig, 1.0 - q.tail_epsilon));
  const double s_lo = std::log(lam_lo) - q.log_pad;
  const double s_hi = std::log(lam_hi) + q.log_pad;

  // Integrate to a tighter internal target so the reported estimate sits
  // safely below the requested tolerance.
  const double outer_tol = 0.1 * q.rel_tol;
  const double inner_tol = 1e-2 * q.rel_tol;
  double worst_inner_err = 0.0;

  const auto outer_log = [&](double s) {
    const double lam = std::exp(s);
    // The mu integrand is exactly a Gaussian bump; center the window on its
    // completed-square mean so the quadrature always sees the peak. The
    // window covers mean_window + 2 posterior standard deviations, leaving
    // ~1e-40 of the bump outside.
    double precision = 1.0 / (lam * m.mean_var_factor);
    double weighted = m.mu0 / (lam * m.mean_var_factor);
    for (double x : xs) {
      precision += 1.0 / (lam * m.obs_var_factor);
      weighted += x / (lam * m.obs_var_factor);
    }
    const double center = weighted / precision;
    const double half_width = (q.mean_window + 2.0) / std::sqrt(precision);
    const auto inner_log = [&](double mu) {
      double v = log_normal_pdf(mu, m.mu0, lam * m.mean_var_factor);
      for (double x : xs) v += log_normal_pdf(x, mu, lam * m.obs_var_factor);
      return v;
    };
    auto [log_inner, inner_err] = log_integrate(inner_log, center - half_width,
                                                center + half_width, inner_tol, q.max_depth);
    worst_inner_err = std::max(worst_inner_err, inner_err);
    return log_inverse_gamma_pdf(lam, m.ig_shape, m.ig_scale) + s + log_inner;
  };

  auto [log_value, outer_err] = log_integrate(outer_log, s_lo, s_hi, outer_tol, q.max_depth);
  QuadratureResult r{log_value, outer_err + worst_inner_err};
  if (!(r.rel_error < q.rel_tol))
    throw solver_error("oracle quadrature did not converge: error estimate " +
                       std::to_string(r.rel_error));
  return r;
}

}  // namespace detail

// Log marginal of a 1-d cluster under the fixed-covariance model, by direct
// quadrature of int N(mu; mu0, psi0) prod_i N(x_i; mu, sigma0) dmu.
inline QuadratureResult quadrature_log_marginal(const FixedCovModel::Spec& spec,
                                                const std::vector<double>& xs,
                                                const QuadratureSpec& q = {}) {
  if (spec.mu0.size() != 1) throw usage_error("quadrature oracle: d = 1 only");
  if (xs.empty() || xs.size() > 6) throw usage_error("quadrature oracle: cluster size 1..6");
  const double mu0 = spec.mu0(0);
  const double psi_var = spec.psi0(0, 0);
  const double sig_var = spec.sigma0(0, 0);
  // Exactly a Gaussian bump in mu; integrate around its completed-square mean.
  double precision = 1.0 / psi_var;
  double weighted = mu0 / psi_var;
  for (double x : xs) {
    precision += 1.0 / sig_var;
    weighted += x / sig_var;
  }
  const double center = weighted / precision;
  const double half_width = (q.mean_window + 2.0) / std::sqrt(precision);
  const auto integrand_log = [&](double mu) {
    double v = detail::log_normal_pdf(mu, mu0, psi_var);
    for (double x : xs) v += detail::log_normal_pdf(x, mu, sig_var);
    return v;
  };
  auto [log_value, err] = detail::log_integrate(integrand_log, center - half_width,
                                                center + half_width, 0.1 * q.rel_tol, q.max_depth);
  QuadratureResult r{log_value, err};
  if (!(r.rel_error < q.rel_tol))
    throw solver_error("oracle quadrature did not converge: error estimate " +
                       std::to_string(r.rel_error));
  return r;
}

// NIW at d = 1: nested quadrature over (mu, Lambda); Lambda marginally
// InverseGamma((nu0+2)/2, nu0 sigma0^2 / 2) and mu | Lambda ~ N(mu0, Lambda/kappa0).
inline QuadratureResult quadrature_log_marginal(const NiwModel::Spec& spec,
                                                const std::vector<double>& xs,
                                                const QuadratureSpec& q = {}) {
  if (spec.mu0.size() != 1) throw usage_error("quadrature oracle: d = 1 only");
  if (xs.empty() || xs.size() > 6) throw usage_error("quadrature oracle: cluster size 1..6");
  detail::ScaleMixture m;
  m.ig_shape = 0.5 * (spec.nu0 + 2.0);
  m.ig_scale = 0.5 * spec.nu0 * spec.sigma0(0, 0);
  m.mu0 = spec.mu0(0);
  m.mean_var_factor = 1.0 / spec.kappa0;
  m.obs_var_factor = 1.0;
  return detail::scale_mixture_log_marginal(m, xs, q);
}

// NIG at d = 1: nested quadrature over (mu, lambda) with
// lambda ~ InverseGamma(beta0 + 1, beta0).
inline QuadratureResult quadrature_log_marginal(const NigModel::Spec& spec,
                                                const std::vector<double>& xs,
                                                const QuadratureSpec& q = {}) {
  if (spec.mu0.size() != 1) throw usage_error("quadrature oracle: d = 1 only");
  if (xs.empty() || xs.size() > 6) throw usage_error("quadrature oracle: cluster size 1..6");
  detail::ScaleMixture m;
  m.ig_shape = spec.beta0 + 1.0;
  m.ig_scale = spec.beta0;
  m.mu0 = spec.mu0(0);
  m.mean_var_factor = spec.psi0(0, 0);
  m.obs_var_factor = spec.sigma0(0, 0);
  return detail::scale_mixture_log_marginal(m, xs, q);
}

struct McResult {
  double log_value = 0.0;
  double log_std_error = 0.0;
};

// Monte-Carlo marginal likelihood at any dimension: average the cluster
// likelihood over prior draws of the component parameters. Weaker than the
// quadrature oracle but dimension-agnostic; agreement is judged in units of
// the returned standard error.
template <ExpFamilyModel M>
McResult mc_log_marginal(const M& model, const Eigen::MatrixXd& points, std::uint64_t seed,
                         int draws) {
  if (draws < 100) throw usage_error("mc_log_marginal: too few draws");
  const int k = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  std::mt19937_64 rng(seed);
  std::vector<double> logs(static_cast<std::size_t>(draws));
  for (int r = 0; r < draws; ++r) {
    const GaussianComponent comp = model.sample_component(rng);
    const auto& l = comp.cov_chol;
    double log_det_half = 0.0;
    for (int i = 0; i < d; ++i) log_det_half += std::log(l(i, i));
    double ll = 0.0;
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd z =
          l.triangularView<Eigen::Lower>().solve(points.row(i).transpose() - comp.mean);
      ll += -0.5 * d * mapsep::detail::log_two_pi - log_det_half - 0.5 * z.squaredNorm();
    }
    logs[static_cast<std::size_t>(r)] = ll;
  }
  const double peak = *std::max_element(logs.begin(), logs.end());
  double sum = 0.0, sum_sq = 0.0;
  for (double l : logs) {
    const double w = std::exp(l - peak);
    sum += w;
    sum_sq += w * w;
  }
  const double mean = sum / draws;
  const double var = std::max(0.0, sum_sq / draws - mean * mean);
  McResult res;
  res.log_value = peak + std::log(mean);
  res.log_std_error = std::sqrt(var / draws) / mean;
  return res;
}

// Exact argmax over k-subsets of `universe` by recursive enumeration in
// lexicographic order; ties keep the first subset seen. The objective
// receives the chosen subset (ascending indices).
inline std::vector<int> brute_force_best_split(
    const std::function<double(const std::vector<int>&)>& objective,
    std::span<const int> universe, int k, std::uint64_t max_candidates = 1'000'000) {
  std::vector<int> u(universe.begin(), universe.end());
  std::sort(u.begin(), u.end());
  const int s = static_cast<int>(u.size());
  if (k < 1 || k >= s) throw usage_error("brute_force_best_split: need 1 <= k < |universe|");
  double candidates = 1.0;
  for (int i = 1; i <= k; ++i) candidates *= static_cast<double>(s - k + i) / i;
  if (candidates > static_cast<double>(max_candidates))
    throw usage_error("brute_force_best_split: candidate count exceeds the guard");

  std::vector<int> best, current;
  double best_obj = -std::numeric_limits<double>::infinity();
  const std::function<void(int)> recurse = [&](int start) {
    if (static_cast<int>(current.size()) == k) {
      const double obj = objective(current);
      if (obj > best_obj) {
        best_obj = obj;
        best = current;
      }
      return;
    }
    const int remaining = k - static_cast<int>(current.size());
    for (int i = start; i <= s - remaining; ++i) {
      current.push_back(u[static_cast<std::size_t>(i)]);
      recurse(i + 1);
      current.pop_back();
    }
  };
  recurse(0);
  return best;
}

// Midpoint-style convexity probe of the log partition:
//   t A(p1) + (1-t) A(p2) - A(t p1 + (1-t) p2),
// which must be strictly positive on distinct admissible parameter pairs.
template <ExpFamilyModel M>
double convexity_probe(const M& model, const NaturalParams& p1, const NaturalParams& p2,
                       double t) {
  if (!(t > 0.0) || !(t < 1.0)) throw usage_error("convexity_probe: t must be inside (0, 1)");
  if (p1.chi == p2.chi && p1.tau == p2.tau)
    throw usage_error("convexity_probe: parameter points must differ");
  const NaturalParams mid = mix(t, p1, p2);
  if (!model.in_domain(mid))
    throw model_error("convexity_probe: midpoint left the admissible set");
  return t * model.log_partition(p1) + (1.0 - t) * model.log_partition(p2) -
         model.log_partition(mid);
}

}  // namespace mapsep::oracle
