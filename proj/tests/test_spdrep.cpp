#include "spdfuse/error.hpp"
#include "spdfuse/spdrep.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

using namespace spdfuse;
using spdfuse::testing::Rng;

namespace {

// O(N^2) double sum over i != j of x_i x_j^T.
Eigen::MatrixXd brute_cross(const Eigen::MatrixXd& x) {
  const auto d = x.rows();
  const auto n = x.cols();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) acc += x.col(i) * x.col(j).transpose();
  return acc / static_cast<double>(n * n - n);
}

Eigen::VectorXd sorted_eigs(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
}

Segment seg2(std::initializer_list<std::initializer_list<double>> columns) {
  const auto n = static_cast<Eigen::Index>(columns.size());
  const auto d = static_cast<Eigen::Index>(columns.begin()->size());
  Eigen::MatrixXd x(d, n);
  Eigen::Index j = 0;
  for (const auto& col : columns) {
    Eigen::Index i = 0;
    for (double v : col) x(i++, j) = v;
    ++j;
  }
  return Segment(x, "s", "t");
}

}  // namespace

TEST(Segment, RejectsDegenerateShapes) {
  EXPECT_THROW(Segment(Eigen::MatrixXd::Zero(1, 5), "s", "t"), Error);
  EXPECT_THROW(Segment(Eigen::MatrixXd::Zero(2, 1), "s", "t"), Error);
}

TEST(Covariance, HandExamples) {
  const Segment a = seg2({{1, 1}, {-1, -1}});
  Eigen::Matrix2d expected;
  expected << 2, 2, 2, 2;
  EXPECT_EQ(covariance(a).matrix(), Eigen::MatrixXd(expected));

  EXPECT_EQ(covariance(Segment(Eigen::MatrixXd::Zero(3, 4), "s", "t")).matrix(),
            Eigen::MatrixXd::Zero(3, 3));
  EXPECT_EQ(covariance(seg2({{1, 0}, {0, 1}})).matrix(), Eigen::MatrixXd::Identity(2, 2));
}

TEST(CrossCovariance, HandExamples) {
  Eigen::Matrix2d expected;
  expected << -1, -1, -1, -1;
  EXPECT_EQ(cross_covariance(seg2({{1, 1}, {-1, -1}})).matrix(), Eigen::MatrixXd(expected));

  const SymMatrix c = cross_covariance(seg2({{1, 0}, {1, 0}, {1, 0}}));
  expected << 1, 0, 0, 0;
  EXPECT_NEAR((c.matrix() - Eigen::MatrixXd(expected)).norm(), 0.0, 1e-15);
}

TEST(CrossCovariance, MatchesBruteForceDoubleSum) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = rng.integer(2, 4);
    const Eigen::Index n = rng.integer(2, 12);
    const Segment seg(rng.matrix(d, n, -3, 3), "s", "t");
    EXPECT_LE((cross_covariance(seg).matrix() - brute_cross(seg.data)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CrossCovariance, PerSegmentCenteringGivesMinusSOverN) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = rng.integer(2, 6);
    const Eigen::Index n = rng.integer(2, 40);
    Eigen::MatrixXd x = rng.matrix(d, n, -3, 3);
    x.colwise() -= x.rowwise().mean();
    const Segment seg(x, "s", "t");
    const Eigen::MatrixXd expected = -covariance(seg).matrix() / static_cast<double>(n);
    EXPECT_LE((cross_covariance(seg).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((brute_cross(x) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Covariance, PositiveSemidefinite) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const Segment seg(rng.matrix(rng.integer(2, 8), rng.integer(2, 30), -5, 5), "s", "t");
    const SymMatrix s = covariance(seg);
    EXPECT_GE(sorted_eigs(s.matrix())(0), -1e-10 * std::max(1.0, s.trace()));
  }
}

TEST(BlockP, MOneIsS) {
  Rng rng(14);
  const Segment seg(rng.matrix(3, 20), "s", "t");
  SpdConfig cfg;
  cfg.m = 1;
  cfg.shrinkage = 0.0;
  EXPECT_EQ(block_p(covariance(seg), cross_covariance(seg), cfg).sym(), covariance(seg));
}

TEST(BlockP, DiagonalExample) {
  SpdConfig cfg;
  cfg.m = 2;
  cfg.shrinkage = 0.0;
  const SpdMatrix p = block_p(SymMatrix::diagonal(Eigen::Vector2d(2, 2)),
                              SymMatrix::diagonal(Eigen::Vector2d(1, 1)), cfg);
  ASSERT_EQ(p.n(), 4u);
  const Eigen::VectorXd ev = sorted_eigs(p.matrix());
  EXPECT_NEAR(ev(0), 1.0, 1e-14);
  EXPECT_NEAR(ev(1), 1.0, 1e-14);
  EXPECT_NEAR(ev(2), 3.0, 1e-14);
  EXPECT_NEAR(ev(3), 3.0, 1e-14);
  EXPECT_NEAR(p.min_eig(), 1.0, 1e-14);
}

TEST(BlockP, SingularSRejected) {
  Eigen::Matrix2d s;
  s << 2, 2, 2, 2;
  for (int m = 1; m <= 4; ++m) {
    SpdConfig cfg;
    cfg.m = m;
    cfg.shrinkage = 0.0;
    try {
      (void)block_p(SymMatrix(s), SymMatrix::zero(2), cfg);
      FAIL() << "expected NotPositiveDefinite for m=" << m;
    } catch (const NotPositiveDefinite& e) {
      EXPECT_LE(e.min_eigenvalue(), 1e-12);
    }
  }
}

TEST(BlockP, DimensionMismatch) {
  try {
    (void)block_p(SymMatrix::identity(2), SymMatrix::identity(3), SpdConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BlockMismatch);
  }
}

TEST(BlockP, EigenstructureMatchesBlockFormula) {
  Rng rng(15);
  for (int m = 2; m <= 4; ++m) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto d = static_cast<std::size_t>(rng.integer(2, 5));
      const SpdMatrix s = rng.spd(d, 2.0, 6.0);
      const SymMatrix c(0.3 * rng.symmetric(d, -1.0, 1.0).matrix());
      SpdConfig cfg;
      cfg.m = m;
      cfg.shrinkage = 0.0;
      const SpdMatrix p = block_p(s.sym(), c, cfg);

      std::vector<double> expected;
      const Eigen::VectorXd e_sum = sorted_eigs(s.matrix() + (m - 1) * c.matrix());
      const Eigen::VectorXd e_diff = sorted_eigs(s.matrix() - c.matrix());
      for (double v : e_sum) expected.push_back(v);
      for (int k = 0; k < m - 1; ++k)
        for (double v : e_diff) expected.push_back(v);
      std::sort(expected.begin(), expected.end());

      const Eigen::VectorXd full = sorted_eigs(p.matrix());
      ASSERT_EQ(static_cast<std::size_t>(full.size()), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i)
        EXPECT_NEAR(full(static_cast<Eigen::Index>(i)), expected[i], 1e-9);
      EXPECT_NEAR(p.min_eig(), expected.front(), 1e-9);
    }
  }
}

TEST(SpdConfig, CapOnBlockDimension) {
  SpdConfig cfg;
  cfg.m = 2;
  try {
    cfg.validate(65);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  EXPECT_NO_THROW(cfg.validate(64));
  cfg.m = 0;
  EXPECT_THROW(cfg.validate(2), Error);
}

TEST(SegmentToSpd, UncorrelatedNoiseHasIdentityDiagonalBlocks) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(2, 100);
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 100; ++j) x(i, j) = rng.normal();
    x.colwise() -= x.rowwise().mean();
    SpdConfig cfg;
    cfg.m = 2;
    cfg.shrinkage = 1e-6;
    const SpdMatrix p = segment_to_spd(Segment(x, "s", "t"), cfg);
    ASSERT_EQ(p.n(), 4u);
    EXPECT_LE((p.matrix().block(0, 0, 2, 2) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.5);
    EXPECT_LE((p.matrix().block(2, 2, 2, 2) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.5);
  }
}

TEST(SegmentToSpd, OversizedConfigRejected) {
  SpdConfig cfg;
  cfg.m = 2;
  const Segment seg(Eigen::MatrixXd::Random(65, 10), "s", "t");
  try {
    (void)segment_to_spd(seg, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(SegmentToSpd, ZeroVarianceChannelWithShrinkageStaysSpd) {
  Rng rng(16);
  Eigen::MatrixXd x(3, 40);
  for (Eigen::Index j = 0; j < 40; ++j) {
    x(0, j) = rng.normal();
    x(1, j) = rng.normal();
    x(2, j) = 0.0;
  }
  SpdConfig cfg;
  cfg.m = 2;
  cfg.shrinkage = 1e-3;
  cfg.centering = Centering::PerSegment;
  const SpdMatrix p = segment_to_spd(Segment(x, "s", "t"), cfg);
  EXPECT_GT(p.min_eig(), 0.0);
  EXPECT_GT(sorted_eigs(p.matrix())(0), 0.0);
}

TEST(SegmentToSpd, ScalingEquivariance) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd x = rng.matrix(3, 30, -2, 2);
    const double alpha = rng.uniform(0.2, 4.0);
    const Segment a(x, "s", "t");
    const Segment b(alpha * x, "s", "t");
    const double a2 = alpha * alpha;
    EXPECT_LE((covariance(b).matrix() - a2 * covariance(a).matrix()).norm(),
              1e-12 * a2 * covariance(a).matrix().norm() + 1e-14);
    EXPECT_LE((cross_covariance(b).matrix() - a2 * cross_covariance(a).matrix()).norm(),
              1e-12 * a2 * (1 + cross_covariance(a).matrix().norm()));
    SpdConfig cfg;
    cfg.m = 2;
    cfg.shrinkage = 1e-3;
    cfg.centering = Centering::None;
    EXPECT_LE((segment_to_spd(b, cfg).matrix() - a2 * segment_to_spd(a, cfg).matrix()).norm(),
              1e-11 * a2 * segment_to_spd(a, cfg).matrix().norm());
  }
}

TEST(SpectralFloor, ClampsNegativeSpectrum) {
  const SpdMatrix p = spectral_floor(SymMatrix::diagonal(Eigen::Vector3d(-1.0, 0.5, 2.0)), 0.1);
  EXPECT_NEAR(p.matrix()(0, 0), 0.1, 1e-15);
  EXPECT_NEAR(p.matrix()(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(p.min_eig(), 0.1, 1e-15);
}
