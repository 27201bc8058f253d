#include "spdfuse/manifold.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace spdfuse;
using spdfuse::testing::Rng;

namespace {

// Geodesic midpoint P1 #_{1/2} P2 through Eigen's own solver.
Eigen::MatrixXd midpoint_oracle(const Eigen::MatrixXd& p1, const Eigen::MatrixXd& p2) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(p1);
  const Eigen::MatrixXd r = e1.operatorSqrt();
  const Eigen::MatrixXd ir = e1.operatorInverseSqrt();
  Eigen::MatrixXd w = ir * p2 * ir;
  w = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ew(w);
  return r * ew.operatorSqrt() * r;
}

SpdMatrix diag_spd(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return SpdMatrix(SymMatrix::diagonal(v));
}

}  // namespace

TEST(Vec, ClosedForms) {
  Eigen::Matrix2d m;
  m << 1, 2, 2, 3;
  const Eigen::VectorXd v = vec(SymMatrix(m));
  ASSERT_EQ(v.size(), 3);
  EXPECT_EQ(v(0), 1.0);
  EXPECT_DOUBLE_EQ(v(1), 2.0 * std::sqrt(2.0));
  EXPECT_EQ(v(2), 3.0);
  EXPECT_NEAR(v.norm(), std::sqrt(18.0), 1e-15);

  const Eigen::VectorXd id = vec(SymMatrix::identity(2));
  EXPECT_EQ(id, Eigen::Vector3d(1, 0, 1));
}

TEST(Vec, RowMajorUpperTriangleOrder) {
  Eigen::Matrix3d m;
  m << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  const Eigen::VectorXd v = vec(SymMatrix(m));
  const double r2 = std::sqrt(2.0);
  Eigen::VectorXd expected(6);
  expected << 1, 2 * r2, 3 * r2, 4, 5 * r2, 6;
  EXPECT_LE((v - expected).norm(), 1e-14);
}

TEST(Vec, InverseLinearAndNormPreserving) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(1, 12));
    const SymMatrix a = rng.symmetric(n);
    const SymMatrix b = rng.symmetric(n);
    EXPECT_NEAR(vec(a).norm(), a.matrix().norm(), 1e-12 * (1 + a.matrix().norm()));
    EXPECT_LE((unvec(vec(a)).matrix() - a.matrix()).norm(), 1e-13 * (1 + a.matrix().norm()));
    const Eigen::VectorXd lin = vec(SymMatrix(2.0 * a.matrix() - b.matrix()));
    EXPECT_LE((lin - (2.0 * vec(a) - vec(b))).norm(), 1e-12 * (1 + lin.norm()));
  }
}

TEST(Vec, UnvecRejectsNonTriangularLength) {
  EXPECT_THROW((void)unvec(Eigen::VectorXd::Zero(4)), Error);
}

TEST(GeodesicDistance, ClosedForms) {
  EXPECT_NEAR(geodesic_distance(diag_spd({1, 1}), diag_spd({1, 1})), 0.0, 1e-15);
  EXPECT_NEAR(geodesic_distance(diag_spd({1, 1}), diag_spd({4, 4})), std::sqrt(2.0) * std::log(4.0), 1e-14);
  EXPECT_NEAR(geodesic_distance(diag_spd({1, 1}), diag_spd({4, 4}), Metric::LogEuclidean),
              std::sqrt(2.0) * std::log(4.0), 1e-14);
}

TEST(GeodesicDistance, DimensionMismatch) {
  try {
    (void)geodesic_distance(diag_spd({1, 1}), diag_spd({1, 1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(GeodesicDistance, MetricAxioms) {
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 12));
    const SpdMatrix a = rng.spd(n), b = rng.spd(n), c = rng.spd(n);
    const double ab = geodesic_distance(a, b), ba = geodesic_distance(b, a);
    EXPECT_NEAR(ab, ba, 1e-10);
    EXPECT_LE(geodesic_distance(a, c), ab + geodesic_distance(b, c) + 1e-8);
    EXPECT_LT(geodesic_distance(a, a), 1e-8);
  }
}

TEST(GeodesicDistance, AffineInvariance) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 8));
    const SpdMatrix p = rng.spd(n), q = rng.spd(n);
    const Eigen::MatrixXd a = rng.invertible(n);
    const SpdMatrix pa(congruence(p.sym(), a)), qa(congruence(q.sym(), a));
    EXPECT_NEAR(geodesic_distance(pa, qa), geodesic_distance(p, q), 1e-8);
  }
}

TEST(GeometricMean, Singleton) {
  Rng rng(24);
  const std::vector<SpdMatrix> set{rng.spd(4)};
  EXPECT_EQ(geometric_mean(set).sym(), set[0].sym());
}

TEST(GeometricMean, EmptySet) {
  try {
    (void)geometric_mean(std::vector<SpdMatrix>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySet);
  }
}

TEST(GeometricMean, TwoDiagonalPoints) {
  const std::vector<SpdMatrix> set{diag_spd({1, 1}), diag_spd({4, 4})};
  const SpdMatrix g = geometric_mean(set);
  EXPECT_LE((g.matrix() - 2.0 * Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-10);
}

TEST(GeometricMean, AllEqual) {
  Rng rng(25);
  const SpdMatrix a = rng.spd(5);
  const std::vector<SpdMatrix> set{a, a, a};
  EXPECT_LE((geometric_mean(set).matrix() - a.matrix()).norm(), 1e-12 * a.matrix().norm());
}

TEST(GeometricMean, TwoPointMatchesClosedFormMidpoint) {
  Rng rng(26);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 10));
    const std::vector<SpdMatrix> set{rng.spd(n), rng.spd(n)};
    const Eigen::MatrixXd expected = midpoint_oracle(set[0].matrix(), set[1].matrix());
    EXPECT_LE((geometric_mean(set).matrix() - expected).norm(), 1e-8);
  }
}

TEST(GeometricMean, OptimalityPermutationAndTangentSum) {
  Rng rng(27);
  MeanConfig cfg;
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 8));
    const int count = rng.integer(2, 12);
    std::vector<SpdMatrix> set;
    for (int i = 0; i < count; ++i) set.push_back(rng.spd(n));
    const SpdMatrix g = geometric_mean(set, cfg);
    EXPECT_LE(karcher_residual(set, g), cfg.tol);

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tangent_dim(n)));
    for (const SpdMatrix& p : set) sum += tangent_map(p, g).values;
    EXPECT_LE(sum.norm(), static_cast<double>(count) * cfg.tol);

    std::vector<SpdMatrix> shuffled = set;
    std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
    EXPECT_LE((geometric_mean(shuffled, cfg).matrix() - g.matrix()).norm(), 1e-8);
  }
}

TEST(GeometricMean, NoConvergenceCarriesIterate) {
  Rng rng(28);
  std::vector<SpdMatrix> set;
  for (int i = 0; i < 6; ++i) set.push_back(rng.spd(4, 0.01, 50.0));
  MeanConfig cfg;
  cfg.max_iters = 1;
  cfg.tol = 1e-300;
  try {
    (void)geometric_mean(set, cfg);
    FAIL();
  } catch (const MeanNoConvergence& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    EXPECT_EQ(e.last_iterate().n(), 4u);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(GeometricMean, LogEuclideanClosedForm) {
  const std::vector<SpdMatrix> set{diag_spd({1, 2}), diag_spd({4, 8})};
  const SpdMatrix g = geometric_mean(set, {}, Metric::LogEuclidean);
  EXPECT_NEAR(g.matrix()(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(g.matrix()(1, 1), 4.0, 1e-12);
}

TEST(MeanConfig, Validation) {
  MeanConfig cfg;
  cfg.step = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.tol = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(TangentMap, ClosedForms) {
  Rng rng(29);
  const SpdMatrix p = rng.spd(4);
  EXPECT_LE(tangent_map(p, p).values.norm(), 1e-12);

  const SpdMatrix q = diag_spd({std::exp(2.0), 1.0});
  const TangentVector s = tangent_map(q, diag_spd({1, 1}));
  EXPECT_LE((s.values - Eigen::Vector3d(2, 0, 0)).norm(), 1e-14);
  const SpdMatrix back = tangent_unmap(TangentVector{Eigen::Vector3d(2, 0, 0), ""}, diag_spd({1, 1}));
  EXPECT_LE((back.matrix() - q.matrix()).norm(), 1e-12);
}

TEST(TangentMap, NormMatchesDistanceAndRoundTrips) {
  Rng rng(30);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 10));
    const SpdMatrix p = rng.spd(n), r = rng.spd(n);
    for (Metric metric : {Metric::AffineInvariant, Metric::LogEuclidean}) {
      const TangentVector s = tangent_map(p, r, metric);
      EXPECT_EQ(s.dim(), n * (n + 1) / 2);
      EXPECT_NEAR(s.values.norm(), geodesic_distance(p, r, metric), 1e-9);
      const SpdMatrix back = tangent_unmap(s, r, metric);
      EXPECT_LE((back.matrix() - p.matrix()).norm() / p.matrix().norm(), 1e-8);
    }
  }
}

TEST(TangentMap, ZeroVectorUnmapsToReference) {
  Rng rng(31);
  const SpdMatrix r = rng.spd(3);
  const SpdMatrix back = tangent_unmap(TangentVector{Eigen::VectorXd::Zero(6), ""}, r);
  EXPECT_LE((back.matrix() - r.matrix()).norm(), 1e-12);
  EXPECT_THROW((void)tangent_unmap(TangentVector{Eigen::VectorXd::Zero(5), ""}, r), Error);
}
