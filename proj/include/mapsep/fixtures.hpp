#pragma once

// Reference values for the 1-d marginal likelihoods, produced by the
// quadrature oracle (rel_tol 1e-8, max_depth 15, tail_epsilon 1e-12,
// log_pad 3, mean_window 12 -- the QuadratureSpec defaults) and frozen here.
// `oracle-check` recomputes them and diffs; the unit tests additionally hold
// the closed forms to them.

#include <vector>

#include "mapsep/models_normal.hpp"
#include "mapsep/oracle.hpp"

namespace mapsep::fixtures {

struct MarginalFixture {
  const char* name;
  ModelKind kind;
  // d = 1 hyperparameters; unused slots are zero.
  double mu0;
  double sigma0;  // Sigma0 as a scalar
  double psi0;    // Psi0 (fixed, nig)
  double kappa0;  // niw
  double nu0;     // niw
  double beta0;   // nig
  std::vector<double> points;
  double log_marginal;   // frozen oracle output
  double oracle_error;   // error estimate reported when frozen
};

inline const std::vector<MarginalFixture>& marginal_fixtures() {
  static const std::vector<MarginalFixture> table = {
      {"fixed_single", ModelKind::fixed_cov, 0.0, 1.0, 1.0, 0, 0, 0,
       {0.0}, -1.2655121234846454, 3.5e-10},
      {"fixed_near_pair", ModelKind::fixed_cov, 0.0, 1.0, 1.0, 0, 0, 0,
       {0.0, 1e-9}, -2.3871832107434003, 5.3e-11},
      {"fixed_spread", ModelKind::fixed_cov, 0.5, 0.25, 4.0, 0, 0, 0,
       {-1.0, 0.25, 2.0}, -11.707467880458884, 1.1e-10},
      {"niw_single", ModelKind::niw, 0.0, 1.0, 0, 1.0, 1.0, 0,
       {0.0}, -0.79815629556942691, 2.6e-10},
      {"niw_cluster", ModelKind::niw, -0.8, 1.6, 0, 2.3, 3.5, 0,
       {-0.4, 0.9, 2.2}, -6.5736347094443861, 3.4e-10},
      {"nig_single", ModelKind::nig, 0.0, 1.0, 1.0, 0, 0, 1.0,
       {0.0}, -0.9808292530117263, 3.0e-10},
      {"nig_cluster", ModelKind::nig, 1.7, 0.5, 2.0, 0, 0, 1.3,
       {-0.4, 0.9, 2.2}, -6.9865995125528864, 2.4e-10},
  };
  return table;
}

inline oracle::QuadratureResult rerun_oracle(const MarginalFixture& f) {
  const auto ident = [](double v) { return v * Eigen::MatrixXd::Identity(1, 1); };
  const Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(1, f.mu0);
  switch (f.kind) {
    case ModelKind::fixed_cov:
      return oracle::quadrature_log_marginal(
          FixedCovModel::Spec{mu0, ident(f.psi0), ident(f.sigma0)}, f.points);
    case ModelKind::niw:
      return oracle::quadrature_log_marginal(
          NiwModel::Spec{mu0, ident(f.sigma0), f.kappa0, f.nu0}, f.points);
    case ModelKind::nig:
      return oracle::quadrature_log_marginal(
          NigModel::Spec{mu0, ident(f.psi0), ident(f.sigma0), f.beta0}, f.points);
  }
  throw usage_error("rerun_oracle: unknown kind");
}

// Closed-form marginal for the same fixture, through the model implementation.
inline double closed_form(const MarginalFixture& f) {
  const auto ident = [](double v) { return v * Eigen::MatrixXd::Identity(1, 1); };
  const Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(1, f.mu0);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(f.points.size()), 1);
  std::vector<int> all;
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = f.points[i];
    all.push_back(static_cast<int>(i));
  }
  const Dataset data(pts);
  switch (f.kind) {
    case ModelKind::fixed_cov:
      return log_marginal(FixedCovModel({mu0, ident(f.psi0), ident(f.sigma0)}), all, data);
    case ModelKind::niw:
      return log_marginal(NiwModel({mu0, ident(f.sigma0), f.kappa0, f.nu0}), all, data);
    case ModelKind::nig:
      return log_marginal(NigModel({mu0, ident(f.psi0), ident(f.sigma0), f.beta0}), all, data);
  }
  throw usage_error("closed_form: unknown kind");
}

}  // namespace mapsep::fixtures
