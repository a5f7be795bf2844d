#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mapsep/common.hpp"
#include "mapsep/exp_family.hpp"
#include "mapsep/models_normal.hpp"
#include "mapsep/partition.hpp"
#include "mapsep/simplex.hpp"

namespace mapsep {

// Verdict threshold applied to the optimal margin of the LP, after the inputs
// have been centered and scaled to unit RMS norm.
inline constexpr double separation_margin_threshold = 1e-9;

// Witness of strict separation: a.t + b >= margin on the first cluster and
// a.t + b <= -margin on the second, with ||a||_2 = 1. Coordinates refer to the
// original (unscaled) statistic vectors.
struct Certificate {
  Eigen::VectorXd a;
  double b = 0.0;
  double margin = 0.0;
  bool normalized = true;
};

struct SeparationOutcome {
  std::optional<Certificate> certificate;
  double lp_margin = 0.0;  // optimum of the scaled LP, reported even on failure

  bool separable() const { return certificate.has_value(); }
};

namespace detail {

// Lexicographic comparison of two point lists; used to pick a canonical
// orientation so that swapping the inputs yields the exactly negated
// certificate.
inline bool lex_less(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) return x.rows() < y.rows();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) < y(i, j)) return true;
      if (x(i, j) > y(i, j)) return false;
    }
  return false;
}

struct SeparationLp {
  lp::LpSolution solution;
  Eigen::VectorXd a;  // in original coordinates
  double b = 0.0;
};

// Max-margin feasibility LP on centered/downscaled inputs:
//   maximize m  s.t.  a.t_i + b >= m (i in X),  a.t_j + b <= -m (j in Y),
//                     ||a||_inf <= 1, m >= 0.
// Free a and b enter as differences of nonnegative parts.
inline SeparationLp solve_separation(const Eigen::MatrixXd& tx, const Eigen::MatrixXd& ty) {
  const int p = static_cast<int>(tx.cols());
  const int nx = static_cast<int>(tx.rows());
  const int ny = static_cast<int>(ty.rows());

  Eigen::RowVectorXd center = (tx.colwise().sum() + ty.colwise().sum()) / (nx + ny);
  Eigen::MatrixXd cx = tx.rowwise() - center;
  Eigen::MatrixXd cy = ty.rowwise() - center;
  double scale = std::sqrt((cx.squaredNorm() + cy.squaredNorm()) / (nx + ny));
  if (!(scale > 0.0)) scale = 1.0;
  cx /= scale;
  cy /= scale;

  // Columns: a+ (p), a- (p), b+, b-, m.
  const int cols = 2 * p + 3;
  const int rows = nx + ny + 2 * p;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  for (int i = 0; i < nx; ++i) {
    A.row(i).head(p) = -cx.row(i);
    A.row(i).segment(p, p) = cx.row(i);
    A(i, 2 * p) = -1.0;
    A(i, 2 * p + 1) = 1.0;
    A(i, 2 * p + 2) = 1.0;
  }
  for (int j = 0; j < ny; ++j) {
    const int r = nx + j;
    A.row(r).head(p) = cy.row(j);
    A.row(r).segment(p, p) = -cy.row(j);
    A(r, 2 * p) = 1.0;
    A(r, 2 * p + 1) = -1.0;
    A(r, 2 * p + 2) = 1.0;
  }
  for (int k = 0; k < p; ++k) {
    A(nx + ny + 2 * k, k) = 1.0;
    A(nx + ny + 2 * k, p + k) = -1.0;
    rhs(nx + ny + 2 * k) = 1.0;
    A(nx + ny + 2 * k + 1, k) = -1.0;
    A(nx + ny + 2 * k + 1, p + k) = 1.0;
    rhs(nx + ny + 2 * k + 1) = 1.0;
  }
  Eigen::VectorXd obj = Eigen::VectorXd::Zero(cols);
  obj(2 * p + 2) = 1.0;

  SeparationLp out;
  out.solution = lp::solve_standard_max(A, rhs, obj);
  if (out.solution.status == lp::LpStatus::optimal) {
    Eigen::VectorXd a_scaled =
        out.solution.x.head(p) - out.solution.x.segment(p, p);
    double b_scaled = out.solution.x(2 * p) - out.solution.x(2 * p + 1);
    // Undo centering and scaling: a.( (t - c)/s ) + b = (a/s).t + (b - a.c/s).
    out.a = a_scaled / scale;
    out.b = b_scaled - out.a.dot(center.transpose());
  }
  return out;
}

}  // namespace detail

// Decides strict linear separability of two point lists (rows are points in
// sufficient-statistic space) and produces a max-margin certificate. The LP
// margin is reported even when below the threshold; an LP breakdown raises
// solver_error rather than masquerading as NotSeparable.
inline SeparationOutcome certify_linear(const Eigen::MatrixXd& tx, const Eigen::MatrixXd& ty) {
  if (tx.cols() != ty.cols())
    throw usage_error("certify_linear: statistic dimensions differ");
  if (tx.rows() < 1 || ty.rows() < 1) throw usage_error("certify_linear: empty cluster");
  if (!tx.allFinite() || !ty.allFinite())
    throw usage_error("certify_linear: statistic vectors must be finite");

  const bool swapped = detail::lex_less(ty, tx);
  const Eigen::MatrixXd& first = swapped ? ty : tx;
  const Eigen::MatrixXd& second = swapped ? tx : ty;

  detail::SeparationLp lp = detail::solve_separation(first, second);
  if (lp.solution.status != lp::LpStatus::optimal)
    throw solver_error("certify_linear: simplex failed (status " +
                       std::to_string(static_cast<int>(lp.solution.status)) + ")");

  SeparationOutcome out;
  out.lp_margin = lp.solution.objective;
  if (out.lp_margin <= separation_margin_threshold) return out;

  Eigen::VectorXd a = swapped ? Eigen::VectorXd(-lp.a) : lp.a;
  double b = swapped ? -lp.b : lp.b;
  const double norm = a.norm();
  if (!(norm > 0.0)) throw solver_error("certify_linear: degenerate certificate direction");
  a /= norm;
  b /= norm;

  // Replay the margin on the original inputs; the certificate must stand on
  // its own, independent of the internal scaling.
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < tx.rows(); ++i)
    margin = std::min(margin, a.dot(tx.row(i).transpose()) + b);
  for (Eigen::Index j = 0; j < ty.rows(); ++j)
    margin = std::min(margin, -(a.dot(ty.row(j).transpose()) + b));
  if (!(margin > 0.0))
    throw solver_error("certify_linear: replayed margin not positive");
  out.certificate = Certificate{std::move(a), b, margin, true};
  return out;
}

struct PairCertificate {
  int block_i = 0;
  int block_j = 0;
  SeparationOutcome outcome;
};

struct PartitionCertification {
  std::vector<PairCertificate> pairs;
  bool all_separable = true;
};

// Certifies every unordered pair of blocks in statistic space.
template <ExpFamilyModel M>
PartitionCertification certify_partition(const M& model, const Dataset& data,
                                         const Partition& partition) {
  if (partition.size() != data.n())
    throw usage_error("certify_partition: partition does not cover the dataset");
  const Eigen::MatrixXd stats = statistic_matrix(model, data);
  const std::vector<std::vector<int>> blocks = partition.blocks();

  PartitionCertification table;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < blocks.size(); ++j) {
      Eigen::MatrixXd ti(blocks[i].size(), stats.cols());
      Eigen::MatrixXd tj(blocks[j].size(), stats.cols());
      for (std::size_t r = 0; r < blocks[i].size(); ++r) ti.row(r) = stats.row(blocks[i][r]);
      for (std::size_t r = 0; r < blocks[j].size(); ++r) tj.row(r) = stats.row(blocks[j][r]);
      PairCertificate pc{static_cast<int>(i), static_cast<int>(j), certify_linear(ti, tj)};
      table.all_separable = table.all_separable && pc.outcome.separable();
      table.pairs.push_back(std::move(pc));
    }
  }
  return table;
}

// Data-space surface decoded from a statistic-space certificate:
// {x : x^T quad x + linear.x + offset = 0}, with quad empty for hyperplanes.
struct SeparatingSurface {
  Eigen::MatrixXd quad;    // 0 x 0 when the surface is a hyperplane
  Eigen::VectorXd linear;
  double offset = 0.0;

  bool is_hyperplane() const { return quad.size() == 0; }

  double evaluate(const Eigen::VectorXd& x) const {
    double v = linear.dot(x) + offset;
    if (!is_hyperplane()) v += x.dot(quad * x);
    return v;
  }
};

// NIW: the quadratic blocks of the certificate give a general quadric.
inline SeparatingSurface decode_surface(const NiwModel& model, const Certificate& cert) {
  const int d = model.dim();
  if (cert.a.size() != model.stat_dim())
    throw usage_error("decode_surface: certificate has wrong dimension for this model");
  SeparatingSurface s;
  s.quad = Eigen::MatrixXd::Zero(d, d);
  s.quad.diagonal() = -0.5 * cert.a.head(d);
  for (int i = 1; i < d; ++i)
    for (int j = 0; j < i; ++j)
      s.quad(i, j) = s.quad(j, i) = -0.5 * cert.a(d + low_index(i, j));
  s.linear = cert.a.tail(d);
  s.offset = cert.b;
  if (s.quad.isZero(0.0)) s.quad.resize(0, 0);
  return s;
}

// Fixed covariance: a hyperplane with normal Sigma0^{-1} a.
inline SeparatingSurface decode_surface(const FixedCovModel& model, const Certificate& cert) {
  if (cert.a.size() != model.stat_dim())
    throw usage_error("decode_surface: certificate has wrong dimension for this model");
  SeparatingSurface s;
  Eigen::LLT<Eigen::MatrixXd> llt(model.spec().sigma0);
  s.linear = llt.solve(cert.a);
  s.offset = cert.b;
  return s;
}

// NIG: a quadric whose matrix is proportional to Sigma0^{-1}; degenerates to a
// hyperplane when the leading certificate coordinate vanishes.
inline SeparatingSurface decode_surface(const NigModel& model, const Certificate& cert) {
  const int d = model.dim();
  if (cert.a.size() != model.stat_dim())
    throw usage_error("decode_surface: certificate has wrong dimension for this model");
  SeparatingSurface s;
  Eigen::LLT<Eigen::MatrixXd> llt(model.spec().sigma0);
  const double gamma = cert.a(0);
  if (gamma != 0.0) {
    Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    s.quad = -0.5 * gamma * 0.5 * (sigma_inv + sigma_inv.transpose());
  }
  s.linear = llt.solve(cert.a.tail(d));
  s.offset = cert.b;
  return s;
}

}  // namespace mapsep
