#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mapsep/separability.hpp"
#include "support/hull_distance.hpp"

using namespace mapsep;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> data) {
  const auto r = data.size();
  const auto c = data.begin()->size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  Eigen::Index i = 0;
  for (const auto& row : data) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::MatrixXd ident(int d, double s = 1.0) { return s * Eigen::MatrixXd::Identity(d, d); }

// Gaussian blobs around two centers; separable for large gaps.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> two_blobs(int nx, int ny, int p, double gap,
                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(nx, p), y(ny, p);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal(rng);
  x.col(0).array() -= gap / 2;
  y.col(0).array() += gap / 2;
  return {x, y};
}

void check_certificate_replay(const Eigen::MatrixXd& tx, const Eigen::MatrixXd& ty,
                              const Certificate& cert) {
  for (Eigen::Index i = 0; i < tx.rows(); ++i)
    CHECK(cert.a.dot(tx.row(i).transpose()) + cert.b >= cert.margin - 1e-12);
  for (Eigen::Index j = 0; j < ty.rows(); ++j)
    CHECK(cert.a.dot(ty.row(j).transpose()) + cert.b <= -(cert.margin - 1e-12));
  CHECK(cert.margin > 0.0);
  CHECK(cert.a.norm() == Catch::Approx(1.0).epsilon(1e-12));
}

}  // namespace

TEST_CASE("one-dimensional interval separation") {
  auto out = certify_linear(rows({{0.0}, {1.0}}), rows({{3.0}}));
  REQUIRE(out.separable());
  const Certificate& c = *out.certificate;
  check_certificate_replay(rows({{0.0}, {1.0}}), rows({{3.0}}), c);
  // Max-margin boundary sits at the midpoint of the gap [1, 3].
  CHECK(-c.b / c.a(0) == Catch::Approx(2.0).margin(1e-9));
  CHECK(c.margin == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("identical points and XOR are not separable") {
  auto same = certify_linear(rows({{0.0, 0.0}}), rows({{0.0, 0.0}}));
  CHECK_FALSE(same.separable());

  auto xorcase = certify_linear(rows({{0, 0}, {1, 1}}), rows({{0, 1}, {1, 0}}));
  CHECK_FALSE(xorcase.separable());
  CHECK(std::abs(xorcase.lp_margin) < 1e-9);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(certify_linear(rows({{0.0}}), rows({{0.0, 1.0}})), usage_error);
  CHECK_THROWS_AS(certify_linear(Eigen::MatrixXd(0, 1), rows({{0.0}})), usage_error);
}

TEST_CASE("swapping the clusters negates the certificate exactly") {
  auto [x, y] = two_blobs(4, 3, 2, 6.0, 11);
  auto fwd = certify_linear(x, y);
  auto rev = certify_linear(y, x);
  REQUIRE(fwd.separable());
  REQUIRE(rev.separable());
  CHECK(fwd.certificate->a == -rev.certificate->a);
  CHECK(fwd.certificate->b == -rev.certificate->b);
  CHECK(fwd.certificate->margin == rev.certificate->margin);
  CHECK(fwd.lp_margin == rev.lp_margin);
}

TEST_CASE("certificates replay on random separable instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int p = 1 + static_cast<int>(seed % 4);
    auto [x, y] = two_blobs(3 + seed % 5, 2 + seed % 4, p, 7.0, 100 + seed);
    auto out = certify_linear(x, y);
    REQUIRE(out.separable());
    check_certificate_replay(x, y, *out.certificate);
  }
}

TEST_CASE("verdicts are invariant under 1e+-3 rescaling") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int p = 1 + static_cast<int>(seed % 3);
    const double gap = (seed % 2 == 0) ? 5.0 : 0.0;  // mix separable and overlapping
    auto [x, y] = two_blobs(4, 4, p, gap, 200 + seed);
    const bool base = certify_linear(x, y).separable();
    for (double s : {1e-3, 1e3}) {
      CHECK(certify_linear(Eigen::MatrixXd(s * x), Eigen::MatrixXd(s * y)).separable() == base);
    }
  }
}

TEST_CASE("agreement with the hull-distance oracle at desk scale") {
  int separable_seen = 0, overlapping_seen = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int p = 1 + static_cast<int>(seed % 3);
    const double gap = (seed % 3 == 0) ? 0.0 : 1.0 + static_cast<double>(seed % 5);
    auto [x, y] = two_blobs(2 + seed % 4, 2 + seed % 4, p, gap, 300 + seed);
    const double dist = testing::hull_distance(x, y);
    auto out = certify_linear(x, y);
    if (dist > 1e-7) {
      CHECK(out.separable());
      ++separable_seen;
    } else if (dist == 0.0) {
      CHECK_FALSE(out.separable());
      ++overlapping_seen;
    }
  }
  CHECK(separable_seen > 10);
  CHECK(overlapping_seen > 5);
}

TEST_CASE("partition certification") {
  Eigen::MatrixXd pts(6, 1);
  pts << 0, 1, 2, 3, 4, 5;
  Dataset data(pts);
  FixedCovModel model({Eigen::VectorXd::Zero(1), ident(1), ident(1)});

  auto single = certify_partition(model, data, Partition::one_block(6));
  CHECK(single.all_separable);
  CHECK(single.pairs.empty());

  // Alternating blocks interleave on the line: no linear separator exists.
  Partition alternating(std::vector<int>{0, 1, 0, 1, 0, 1});
  auto bad = certify_partition(model, data, alternating);
  CHECK_FALSE(bad.all_separable);
  REQUIRE(bad.pairs.size() == 1);
  CHECK_FALSE(bad.pairs[0].outcome.separable());

  Partition split(std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(certify_partition(model, data, split).all_separable);
}

TEST_CASE("surface decoding replays the certificate") {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> normal;
  const auto random_cert = [&](int p) {
    Certificate c;
    c.a.resize(p);
    for (int i = 0; i < p; ++i) c.a(i) = normal(rng);
    c.a.normalize();
    c.b = normal(rng);
    c.margin = 1.0;
    return c;
  };

  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.3, 0.4, 0.4, 0.9;

  NiwModel niw({Eigen::VectorXd::Zero(2), sigma, 1.0, 3.0});
  FixedCovModel fixed({Eigen::VectorXd::Zero(2), ident(2), sigma});
  NigModel nig({Eigen::VectorXd::Zero(2), ident(2), sigma, 1.5});

  const auto check_replay = [&](const auto& model, const SeparatingSurface& surf,
                                const Certificate& cert) {
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(2);
      x << normal(rng), normal(rng);
      const double via_stat = cert.a.dot(model.suff_stat(x)) + cert.b;
      CHECK(std::abs(surf.evaluate(x) - via_stat) < 1e-10);
    }
  };

  Certificate cw = random_cert(niw.stat_dim());
  check_replay(niw, decode_surface(niw, cw), cw);

  Certificate cf = random_cert(fixed.stat_dim());
  SeparatingSurface sf = decode_surface(fixed, cf);
  CHECK(sf.is_hyperplane());
  check_replay(fixed, sf, cf);

  Certificate cg = random_cert(nig.stat_dim());
  SeparatingSurface sg = decode_surface(nig, cg);
  CHECK_FALSE(sg.is_hyperplane());
  // Quadratic part proportional to Sigma0^{-1}.
  Eigen::MatrixXd product = sg.quad * sigma;
  const double scale = product(0, 0);
  CHECK((product - scale * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  check_replay(nig, sg, cg);

  // Degenerate NIG certificate (zero leading coordinate) is a hyperplane.
  Certificate flat = random_cert(nig.stat_dim());
  flat.a(0) = 0.0;
  CHECK(decode_surface(nig, flat).is_hyperplane());
}

TEST_CASE("fixed-covariance decoding with identity covariance returns the raw normal") {
  FixedCovModel model({Eigen::VectorXd::Zero(2), ident(2), ident(2)});
  Certificate c;
  c.a = Eigen::Vector2d(0.6, -0.8);
  c.b = 0.25;
  c.margin = 0.1;
  SeparatingSurface s = decode_surface(model, c);
  CHECK(s.is_hyperplane());
  CHECK(s.linear.isApprox(c.a, 1e-14));
  CHECK(s.offset == c.b);
}

TEST_CASE("NIW d=1 decoding expands to -a1 x^2/2 + a2 x + b") {
  NiwModel model({Eigen::VectorXd::Zero(1), ident(1), 1.0, 1.0});
  Certificate c;
  c.a = Eigen::Vector2d(0.8, 0.6);
  c.b = -0.3;
  c.margin = 0.1;
  SeparatingSurface s = decode_surface(model, c);
  for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, x);
    CHECK(s.evaluate(xv) ==
          Catch::Approx(-0.5 * 0.8 * x * x + 0.6 * x - 0.3).margin(1e-14));
  }
}
