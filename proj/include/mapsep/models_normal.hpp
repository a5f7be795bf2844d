#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "mapsep/common.hpp"
#include "mapsep/exp_family.hpp"

namespace mapsep {

enum class ModelKind { niw, fixed_cov, nig };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::niw: return "niw";
    case ModelKind::fixed_cov: return "fixed";
    case ModelKind::nig: return "nig";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Symmetric-matrix vectorization.
//
// A symmetric d x d matrix is stored as its diagonal (length d) followed by
// the strict lower triangle (length d(d-1)/2), the latter ordered so that the
// 1-based entry (i, j), i > j, sits at 1-based position (i-1)(i-2)/2 + j.
// ---------------------------------------------------------------------------

struct SymVec {
  Eigen::VectorXd diag;
  Eigen::VectorXd low;
};

// 0-based position of entry (i, j), i > j, within the low vector.
inline int low_index(int i, int j) { return i * (i - 1) / 2 + j; }

inline SymVec sym_pack(const Eigen::MatrixXd& s, double sym_tol = 1e-12) {
  const int d = static_cast<int>(s.rows());
  if (s.cols() != d) throw usage_error("sym_pack: matrix must be square");
  if (((s - s.transpose()).cwiseAbs().maxCoeff()) > sym_tol)
    throw usage_error("sym_pack: matrix is not symmetric");
  SymVec v;
  v.diag = s.diagonal();
  v.low.resize(d * (d - 1) / 2);
  for (int i = 1; i < d; ++i)
    for (int j = 0; j < i; ++j) v.low(low_index(i, j)) = s(i, j);
  return v;
}

inline Eigen::MatrixXd sym_unpack(const SymVec& v) {
  const int d = static_cast<int>(v.diag.size());
  if (v.low.size() != d * (d - 1) / 2) throw usage_error("sym_unpack: block sizes inconsistent");
  Eigen::MatrixXd s(d, d);
  s.diagonal() = v.diag;
  for (int i = 1; i < d; ++i)
    for (int j = 0; j < i; ++j) s(i, j) = s(j, i) = v.low(low_index(i, j));
  return s;
}

// ln Gamma_d(a) = d(d-1)/4 ln pi + sum_{j=1..d} ln Gamma(a + (1-j)/2.
inline double log_mvgamma(int d, double a) {
  if (d < 1) throw usage_error("log_mvgamma: dimension must be positive");
  if (!(a > 0.5 * (d - 1)))
    throw model_error("log_mvgamma: argument " + std::to_string(a) +
                      " is at or below the pole for d = " + std::to_string(d));
  double r = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= d; ++j) r += std::lgamma(a + 0.5 * (1 - j));
  return r;
}

namespace detail {

inline constexpr double log_two_pi = 1.8378770664093454836;

inline void check_spd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw usage_error(std::string(name) + " must be square");
  if (!m.allFinite()) throw usage_error(std::string(name) + " must be finite");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw usage_error(std::string(name) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw usage_error(std::string(name) + " must be positive definite");
}

inline double chol_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  Eigen::MatrixXd inv =
      llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());  // exact symmetry for packing
}

inline Eigen::VectorXd pack_flat(const Eigen::MatrixXd& s) {
  SymVec v = sym_pack(s);
  Eigen::VectorXd out(v.diag.size() + v.low.size());
  out << v.diag, v.low;
  return out;
}

inline Eigen::MatrixXd unpack_flat(const Eigen::VectorXd& v, int d) {
  SymVec sv{v.head(d), v.tail(d * (d - 1) / 2)};
  return sym_unpack(sv);
}

}  // namespace detail

// Component parameters drawn from a prior, in (mean, covariance Cholesky) form.
struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_chol;  // lower triangular
};

inline Eigen::VectorXd sample_gaussian(const GaussianComponent& c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(c.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return c.mean + c.cov_chol * z;
}

// Lambda ~ InverseWishart(dof, scale), sampled through the Bartlett
// decomposition of Wishart(dof, scale^{-1}).
inline Eigen::MatrixXd sample_inverse_wishart(double dof, const Eigen::MatrixXd& scale,
                                              std::mt19937_64& rng) {
  const int d = static_cast<int>(scale.rows());
  if (!(dof > d - 1)) throw usage_error("sample_inverse_wishart: dof too small");
  Eigen::LLT<Eigen::MatrixXd> scale_inv_llt(detail::spd_inverse(scale));
  Eigen::MatrixXd l = scale_inv_llt.matrixL();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  std::normal_distribution<double> normal;
  for (int i = 0; i < d; ++i) {
    std::chi_squared_distribution<double> chi2(dof - i);
    a(i, i) = std::sqrt(chi2(rng));
    for (int j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  Eigen::MatrixXd m = l * a;
  Eigen::MatrixXd w = m * m.transpose();
  return detail::spd_inverse(w);
}

// ---------------------------------------------------------------------------
// Normal-inverse-Wishart model.
//
//   Lambda ~ IW(nu0 + d + 1, nu0 Sigma0),  mu | Lambda ~ N(mu0, Lambda/kappa0),
//   x | mu, Lambda ~ N(mu, Lambda).
//
// T(x) = [-1/2 diag(x x^T); -low(x x^T); x], tau accumulates (1, 1) per
// observation. Decoding a generic admissible (chi, tau):
//   kappa = tau_2, nu = tau_1 - 2d - 3, m = chi_lin / kappa,
//   S from the quadratic blocks, Psi = S - kappa m m^T,
//   A = -d/2 ln kappa - (nu+d+1)/2 ln(|Psi| / 2^d) + ln Gamma_d((nu+d+1)/2).
// ---------------------------------------------------------------------------

class NiwModel {
 public:
  struct Spec {
    Eigen::VectorXd mu0;
    Eigen::MatrixXd sigma0;
    double kappa0 = 1.0;
    double nu0 = 1.0;
  };

  explicit NiwModel(Spec spec) : spec_(std::move(spec)) {
    const int d = static_cast<int>(spec_.mu0.size());
    if (d < 1 || !spec_.mu0.allFinite()) throw usage_error("NiwModel: bad mu0");
    if (spec_.sigma0.rows() != d) throw usage_error("NiwModel: Sigma0/mu0 dimension mismatch");
    detail::check_spd(spec_.sigma0, "NiwModel: Sigma0");
    if (!(spec_.kappa0 > 0) || !(spec_.nu0 > 0))
      throw usage_error("NiwModel: kappa0 and nu0 must be positive");
    d_ = d;
    tau_step_ = Eigen::Vector2d(1.0, 1.0);

    Eigen::MatrixXd scatter =
        spec_.nu0 * spec_.sigma0 + spec_.kappa0 * spec_.mu0 * spec_.mu0.transpose();
    SymVec sv = sym_pack(0.5 * (scatter + scatter.transpose()));
    prior_.chi.resize(stat_dim());
    prior_.chi << -0.5 * sv.diag, -sv.low, spec_.kappa0 * spec_.mu0;
    prior_.tau = Eigen::Vector2d(spec_.nu0 + 2 * d_ + 3, spec_.kappa0);
    prior_log_partition_ = log_partition(prior_);
  }

  ModelKind kind() const { return ModelKind::niw; }
  const Spec& spec() const { return spec_; }
  int dim() const { return d_; }
  int stat_dim() const { return d_ * (d_ + 3) / 2; }
  int tau_dim() const { return 2; }
  const Eigen::VectorXd& tau_step() const { return tau_step_; }
  const NaturalParams& prior() const { return prior_; }
  double prior_log_partition() const { return prior_log_partition_; }

  Eigen::VectorXd suff_stat(const Eigen::VectorXd& x) const {
    Eigen::VectorXd t(stat_dim());
    t.head(d_) = (-0.5 * x.array().square()).matrix();
    int k = d_;
    for (int i = 1; i < d_; ++i)
      for (int j = 0; j < i; ++j) t(k++) = -x(i) * x(j);
    t.tail(d_) = x;
    return t;
  }

  double log_base(const Eigen::VectorXd&) const { return -0.5 * d_ * detail::log_two_pi; }

  bool in_domain(const NaturalParams& p) const {
    Decoded dec;
    return decode(p, dec);
  }

  double log_partition(const NaturalParams& p) const {
    Decoded dec;
    if (!decode(p, dec)) throw model_error("NiwModel: parameters outside the admissible set");
    const double half_dof = 0.5 * (dec.nu + d_ + 1);
    const double a = -0.5 * d_ * std::log(dec.kappa) -
                     half_dof * (dec.log_det_psi - d_ * std::numbers::ln2) +
                     log_mvgamma(d_, half_dof);
    if (!std::isfinite(a)) throw model_error("NiwModel: log_partition not finite");
    return a;
  }

  GaussianComponent sample_component(std::mt19937_64& rng) const {
    Eigen::MatrixXd lambda =
        sample_inverse_wishart(spec_.nu0 + d_ + 1, spec_.nu0 * spec_.sigma0, rng);
    Eigen::LLT<Eigen::MatrixXd> llt(lambda);
    GaussianComponent mean_dist{spec_.mu0,
                                Eigen::MatrixXd(llt.matrixL()) / std::sqrt(spec_.kappa0)};
    std::mt19937_64& r = rng;
    Eigen::VectorXd mu = sample_gaussian(mean_dist, r);
    return {mu, Eigen::MatrixXd(llt.matrixL())};
  }

 private:
  struct Decoded {
    double kappa = 0, nu = 0, log_det_psi = 0;
  };

  bool decode(const NaturalParams& p, Decoded& out) const {
    if (p.chi.size() != stat_dim() || p.tau.size() != 2)
      throw usage_error("NiwModel: parameter blocks have the wrong shape");
    if (!p.all_finite()) return false;
    const double kappa = p.tau(1);
    const double nu = p.tau(0) - 2 * d_ - 3;
    if (!(kappa > 0) || !(nu > -2)) return false;
    SymVec sv{-2.0 * p.chi.head(d_), -p.chi.segment(d_, d_ * (d_ - 1) / 2)};
    Eigen::VectorXd m = p.chi.tail(d_) / kappa;
    Eigen::MatrixXd psi = sym_unpack(sv) - kappa * m * m.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(psi);
    if (llt.info() != Eigen::Success) return false;
    out.kappa = kappa;
    out.nu = nu;
    out.log_det_psi = detail::chol_log_det(llt);
    return std::isfinite(out.log_det_psi);
  }

  Spec spec_;
  int d_ = 0;
  Eigen::VectorXd tau_step_;
  NaturalParams prior_;
  double prior_log_partition_ = 0.0;
};

// ---------------------------------------------------------------------------
// Normal model with fixed component covariance.
//
//   mu ~ N(mu0, Psi0),  x | mu ~ N(mu, Sigma0).
//
// T(x) = Sigma0^{-1} x; tau packs a precision matrix and accumulates
// pack(Sigma0^{-1}) per observation. For Q = unpack(tau):
//   A = -1/2 ln|Q| + 1/2 chi^T Q^{-1} chi.
// ---------------------------------------------------------------------------

class FixedCovModel {
 public:
  struct Spec {
    Eigen::VectorXd mu0;
    Eigen::MatrixXd psi0;
    Eigen::MatrixXd sigma0;
  };

  explicit FixedCovModel(Spec spec) : spec_(std::move(spec)) {
    const int d = static_cast<int>(spec_.mu0.size());
    if (d < 1 || !spec_.mu0.allFinite()) throw usage_error("FixedCovModel: bad mu0");
    if (spec_.psi0.rows() != d || spec_.sigma0.rows() != d)
      throw usage_error("FixedCovModel: hyperparameter dimension mismatch");
    detail::check_spd(spec_.psi0, "FixedCovModel: Psi0");
    detail::check_spd(spec_.sigma0, "FixedCovModel: Sigma0");
    d_ = d;
    sigma0_llt_.compute(spec_.sigma0);
    psi0_llt_.compute(spec_.psi0);
    tau_step_ = detail::pack_flat(detail::spd_inverse(spec_.sigma0));
    prior_.chi = psi0_llt_.solve(spec_.mu0);
    prior_.tau = detail::pack_flat(detail::spd_inverse(spec_.psi0));
    log_base_const_ = -0.5 * d_ * detail::log_two_pi - 0.5 * detail::chol_log_det(sigma0_llt_);
    prior_log_partition_ = log_partition(prior_);
  }

  ModelKind kind() const { return ModelKind::fixed_cov; }
  const Spec& spec() const { return spec_; }
  int dim() const { return d_; }
  int stat_dim() const { return d_; }
  int tau_dim() const { return d_ * (d_ + 1) / 2; }
  const Eigen::VectorXd& tau_step() const { return tau_step_; }
  const NaturalParams& prior() const { return prior_; }
  double prior_log_partition() const { return prior_log_partition_; }

  Eigen::VectorXd suff_stat(const Eigen::VectorXd& x) const { return sigma0_llt_.solve(x); }

  double log_base(const Eigen::VectorXd& x) const {
    return log_base_const_ - 0.5 * x.dot(sigma0_llt_.solve(x));
  }

  bool in_domain(const NaturalParams& p) const {
    Decoded dec;
    return decode(p, dec);
  }

  double log_partition(const NaturalParams& p) const {
    Decoded dec;
    if (!decode(p, dec)) throw model_error("FixedCovModel: parameters outside the admissible set");
    const double a = -0.5 * dec.log_det_q + 0.5 * p.chi.dot(dec.q_llt.solve(p.chi));
    if (!std::isfinite(a)) throw model_error("FixedCovModel: log_partition not finite");
    return a;
  }

  GaussianComponent sample_component(std::mt19937_64& rng) const {
    GaussianComponent mean_dist{spec_.mu0, Eigen::MatrixXd(psi0_llt_.matrixL())};
    Eigen::VectorXd mu = sample_gaussian(mean_dist, rng);
    return {mu, Eigen::MatrixXd(sigma0_llt_.matrixL())};
  }

 private:
  struct Decoded {
    Eigen::LLT<Eigen::MatrixXd> q_llt;
    double log_det_q = 0;
  };

  bool decode(const NaturalParams& p, Decoded& out) const {
    if (p.chi.size() != d_ || p.tau.size() != tau_dim())
      throw usage_error("FixedCovModel: parameter blocks have the wrong shape");
    if (!p.all_finite()) return false;
    out.q_llt.compute(detail::unpack_flat(p.tau, d_));
    if (out.q_llt.info() != Eigen::Success) return false;
    out.log_det_q = detail::chol_log_det(out.q_llt);
    return std::isfinite(out.log_det_q);
  }

  Spec spec_;
  int d_ = 0;
  Eigen::LLT<Eigen::MatrixXd> sigma0_llt_, psi0_llt_;
  Eigen::VectorXd tau_step_;
  NaturalParams prior_;
  double log_base_const_ = 0.0;
  double prior_log_partition_ = 0.0;
};

// ---------------------------------------------------------------------------
// Normal-inverse-Gamma model: covariances known up to a random scale.
//
//   lambda ~ IG(beta0 + 1, beta0),  mu | lambda ~ N(mu0, lambda Psi0),
//   x | mu, lambda ~ N(mu, lambda Sigma0).
//
// T(x) = [-1/2 x^T Sigma0^{-1} x; Sigma0^{-1} x]; tau accumulates
// [d/2; pack(Sigma0^{-1})] per observation. Decoding tau = [tau1; pack(Q)]
// and chi = [chi1; chi_lin]:
//   b = tau1 - 1,  c = -chi1 - 1/2 chi_lin^T Q^{-1} chi_lin,
//   A = -1/2 ln|Q| + ln Gamma(b) - b ln c.
// The inverse-gamma factor integrates against exp(chi1 / lambda), which makes
// chi1 at the prior equal to -(beta0 + 1/2 mu0^T Psi0^{-1} mu0).
// ---------------------------------------------------------------------------

class NigModel {
 public:
  struct Spec {
    Eigen::VectorXd mu0;
    Eigen::MatrixXd psi0;
    Eigen::MatrixXd sigma0;
    double beta0 = 1.0;
  };

  explicit NigModel(Spec spec) : spec_(std::move(spec)) {
    const int d = static_cast<int>(spec_.mu0.size());
    if (d < 1 || !spec_.mu0.allFinite()) throw usage_error("NigModel: bad mu0");
    if (spec_.psi0.rows() != d || spec_.sigma0.rows() != d)
      throw usage_error("NigModel: hyperparameter dimension mismatch");
    detail::check_spd(spec_.psi0, "NigModel: Psi0");
    detail::check_spd(spec_.sigma0, "NigModel: Sigma0");
    if (!(spec_.beta0 > 0)) throw usage_error("NigModel: beta0 must be positive");
    d_ = d;
    sigma0_llt_.compute(spec_.sigma0);
    psi0_llt_.compute(spec_.psi0);
    tau_step_.resize(tau_dim());
    tau_step_ << 0.5 * d_, detail::pack_flat(detail::spd_inverse(spec_.sigma0));

    Eigen::VectorXd psi_inv_mu = psi0_llt_.solve(spec_.mu0);
    prior_.chi.resize(stat_dim());
    prior_.chi << -spec_.beta0 - 0.5 * spec_.mu0.dot(psi_inv_mu), psi_inv_mu;
    prior_.tau.resize(tau_dim());
    prior_.tau << spec_.beta0 + 2.0, detail::pack_flat(detail::spd_inverse(spec_.psi0));
    log_base_const_ = -0.5 * d_ * detail::log_two_pi - 0.5 * detail::chol_log_det(sigma0_llt_);
    prior_log_partition_ = log_partition(prior_);
  }

  ModelKind kind() const { return ModelKind::nig; }
  const Spec& spec() const { return spec_; }
  int dim() const { return d_; }
  int stat_dim() const { return 1 + d_; }
  int tau_dim() const { return 1 + d_ * (d_ + 1) / 2; }
  const Eigen::VectorXd& tau_step() const { return tau_step_; }
  const NaturalParams& prior() const { return prior_; }
  double prior_log_partition() const { return prior_log_partition_; }

  Eigen::VectorXd suff_stat(const Eigen::VectorXd& x) const {
    Eigen::VectorXd sx = sigma0_llt_.solve(x);
    Eigen::VectorXd t(stat_dim());
    t << -0.5 * x.dot(sx), sx;
    return t;
  }

  double log_base(const Eigen::VectorXd&) const { return log_base_const_; }

  bool in_domain(const NaturalParams& p) const {
    Decoded dec;
    return decode(p, dec);
  }

  double log_partition(const NaturalParams& p) const {
    Decoded dec;
    if (!decode(p, dec)) throw model_error("NigModel: parameters outside the admissible set");
    const double a =
        -0.5 * dec.log_det_q + std::lgamma(dec.b) - dec.b * std::log(dec.c);
    if (!std::isfinite(a)) throw model_error("NigModel: log_partition not finite");
    return a;
  }

  GaussianComponent sample_component(std::mt19937_64& rng) const {
    std::gamma_distribution<double> gamma(spec_.beta0 + 1.0, 1.0 / spec_.beta0);
    const double lambda = 1.0 / gamma(rng);
    GaussianComponent mean_dist{spec_.mu0,
                                std::sqrt(lambda) * Eigen::MatrixXd(psi0_llt_.matrixL())};
    Eigen::VectorXd mu = sample_gaussian(mean_dist, rng);
    return {mu, std::sqrt(lambda) * Eigen::MatrixXd(sigma0_llt_.matrixL())};
  }

 private:
  struct Decoded {
    double b = 0, c = 0, log_det_q = 0;
  };

  bool decode(const NaturalParams& p, Decoded& out) const {
    if (p.chi.size() != stat_dim() || p.tau.size() != tau_dim())
      throw usage_error("NigModel: parameter blocks have the wrong shape");
    if (!p.all_finite()) return false;
    Eigen::LLT<Eigen::MatrixXd> q_llt(detail::unpack_flat(p.tau.tail(tau_dim() - 1), d_));
    if (q_llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd chi_lin = p.chi.tail(d_);
    out.b = p.tau(0) - 1.0;
    out.c = -p.chi(0) - 0.5 * chi_lin.dot(q_llt.solve(chi_lin));
    out.log_det_q = detail::chol_log_det(q_llt);
    return out.b > 0 && out.c > 0 && std::isfinite(out.log_det_q);
  }

  Spec spec_;
  int d_ = 0;
  Eigen::LLT<Eigen::MatrixXd> sigma0_llt_, psi0_llt_;
  Eigen::VectorXd tau_step_;
  NaturalParams prior_;
  double log_base_const_ = 0.0;
  double prior_log_partition_ = 0.0;
};

static_assert(ExpFamilyModel<NiwModel>);
static_assert(ExpFamilyModel<FixedCovModel>);
static_assert(ExpFamilyModel<NigModel>);

}  // namespace mapsep
