#include "support.hpp"

#include "ttdsr/degradation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ttdsr;
using ttdsr::testing::brute_kron;
using ttdsr::testing::Gen;
using ttdsr::testing::rel_diff;

TEST(SpatialOperator, DeltaKernelNoDecimationIsIdentity) {
    EXPECT_EQ(build_spatial(7, {1, 1, 0.0}), Matrix::Identity(7, 7));
}

TEST(SpatialOperator, DecimationPicksBlockCentres) {
    Matrix want = Matrix::Zero(2, 4);
    want(0, 0) = 1.0;  // 1-based pixel 1
    want(1, 2) = 1.0;  // 1-based pixel 3
    EXPECT_EQ(build_spatial(4, {2, 1, 0.0}), want);

    // d = 4 starts at 1-based pixel 2, then 6
    const Matrix s = downsample_matrix(8, 4);
    EXPECT_EQ(s(0, 1), 1.0);
    EXPECT_EQ(s(1, 5), 1.0);
    EXPECT_EQ(s.sum(), 2.0);
    EXPECT_EQ(SpatialParams({3, 1, 0.0}).offset(), 2);
}

TEST(SpatialOperator, WideKernelOnSmallAxisStaysStochastic) {
    const Matrix p = build_spatial(8, {4, 9, 0.0});
    ASSERT_EQ(p.rows(), 2);
    ASSERT_EQ(p.cols(), 8);
    for (Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(SpatialOperator, BlurIsSymmetricGaussianWithMirroredEdges) {
    const double sigma = 0.5;
    const Matrix k = gaussian_blur_matrix(6, 3, sigma);
    const double w1 = std::exp(-0.5 / (sigma * sigma));
    const double centre = 1.0 / (1.0 + 2.0 * w1);
    EXPECT_NEAR(k(2, 2), centre, 1e-15);
    EXPECT_NEAR(k(2, 1), w1 * centre, 1e-15);
    EXPECT_NEAR(k(2, 3), w1 * centre, 1e-15);
    // first pixel mirrors its missing left neighbour onto itself
    EXPECT_NEAR(k(0, 0), centre + w1 * centre, 1e-15);
    EXPECT_LE((k - Matrix(k.reverse())).cwiseAbs().maxCoeff(), 1e-15);
    for (Index i = 0; i < 6; ++i) EXPECT_NEAR(k.row(i).sum(), 1.0, 1e-14);
}

TEST(SpatialOperator, DefaultSigmaIsSixthOfWidth) {
    EXPECT_DOUBLE_EQ(SpatialParams({2, 9, 0.0}).effective_sigma(), 1.5);
    EXPECT_DOUBLE_EQ(SpatialParams({2, 9, 0.7}).effective_sigma(), 0.7);
}

TEST(SpatialOperator, RejectsBadParameters) {
    EXPECT_THROW(build_spatial(10, {3, 3, 0.0}), std::invalid_argument);
    EXPECT_THROW(build_spatial(8, {2, 4, 0.0}), std::invalid_argument);
    EXPECT_THROW(gaussian_blur_matrix(8, 3, 0.0), std::invalid_argument);
}

TEST(SpectralOperator, IdentityWhenNoAggregation) {
    EXPECT_EQ(build_spectral(5, 5).p3, Matrix::Identity(5, 5));
}

TEST(SpectralOperator, EvenAndUnevenGroups) {
    Matrix want(2, 6);
    want << 1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1;
    want /= 3.0;
    EXPECT_EQ(build_spectral(6, 2).p3, want);

    const SpectralOperator op = build_spectral(5, 2);
    EXPECT_EQ(op.band_ranges, (std::vector<std::pair<Index, Index>>{{0, 3}, {3, 5}}));
    EXPECT_NEAR(op.p3.row(0).sum(), 1.0, 1e-15);
    EXPECT_NEAR(op.p3.row(1).sum(), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(op.p3(1, 4), 0.5);
    EXPECT_THROW(build_spectral(3, 4), std::invalid_argument);
}

TEST(SpectralOperator, PropertyRowsStochasticAndDisjoint) {
    Gen g(1);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n3 = g.integer(1, 30);
        const Index m3 = g.integer(1, n3);
        const Matrix p = build_spectral(n3, m3).p3;
        EXPECT_GE(p.minCoeff(), 0.0);
        for (Index j = 0; j < m3; ++j) EXPECT_NEAR(p.row(j).sum(), 1.0, 1e-14);
        for (Index b = 0; b < n3; ++b) EXPECT_EQ((p.col(b).array() > 0).count(), 1);
    }
}

TEST(DegradeSpatial, IdentityAndConstant) {
    Gen g(2);
    const Tensor3 z = g.tensor({4, 6, 3});
    EXPECT_EQ(degrade_spatial(z, Matrix::Identity(4, 4), Matrix::Identity(6, 6)), z);

    const SpatialOperator op = build_spatial_operator(8, 8, {2, 5, 0.0});
    const Tensor3 c({8, 8, 3}, 2.5);
    const Tensor3 y = degrade_spatial(c, op);
    for (double v : y.values()) EXPECT_NEAR(v, 2.5, 1e-14);
}

TEST(DegradeSpatial, SliceFormulaMatchesModeProducts) {
    Gen g(3);
    const Tensor3 z = g.tensor({8, 6, 4});
    const SpatialOperator op = build_spatial_operator(8, 6, {2, 3, 0.0});
    const Tensor3 y = degrade_spatial(z, op);
    ASSERT_EQ(y.dims(), (Dims{4, 3, 4}));
    for (Index k = 0; k < 4; ++k) {
        const Matrix want = op.p1 * Matrix(z.frontal_slice(k)) * op.p2.transpose();
        EXPECT_LE(rel_diff(Matrix(y.frontal_slice(k)), want), 1e-13);
    }
    EXPECT_THROW(degrade_spatial(z, op.p2, op.p1), std::invalid_argument);
}

TEST(DegradeSpatial, ModeThreeUnfoldingFactorizes) {
    Gen g(4);
    const Tensor3 z = g.tensor({6, 4, 5});
    const SpatialOperator op = build_spatial_operator(6, 4, {2, 3, 0.0});
    const Tensor3 y = degrade_spatial(z, op);
    const Matrix ph = brute_kron(op.p2, op.p1);
    const Matrix want = unfold(z, {3, 1, 2}) * ph.transpose();
    EXPECT_LE(rel_diff(unfold(y, {3, 1, 2}), want), 1e-12);
}

TEST(DegradeSpectral, FiberFormulaAndAveraging) {
    Gen g(5);
    const Tensor3 z = g.tensor({3, 4, 6});
    EXPECT_EQ(degrade_spectral(z, Matrix::Identity(6, 6)), z);
    const SpectralOperator op = build_spectral(6, 4);
    const Tensor3 y = degrade_spectral(z, op);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 4; ++j) {
            Vector fiber(6);
            for (Index k = 0; k < 6; ++k) fiber[k] = z(i, j, k);
            const Vector out = op.p3 * fiber;
            for (Index b = 0; b < 4; ++b) EXPECT_NEAR(y(i, j, b), out[b], 1e-13);
        }

    Tensor3 two({2, 2, 2});
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
            two(i, j, 0) = static_cast<double>(1 + i + j);
            two(i, j, 1) = 3.0 * two(i, j, 0);
        }
    const Tensor3 avg = degrade_spectral(two, build_spectral(2, 1));
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(avg(i, j, 0), 2.0 * two(i, j, 0));
    EXPECT_THROW(degrade_spectral(z, build_spectral(5, 2)), std::invalid_argument);
}

TEST(Degrade, SpatialAndSpectralCommute) {
    Gen g(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor3 z = g.tensor({8, 4, g.integer(2, 9)});
        const SpatialOperator sp = build_spatial_operator(8, 4, {2, 3, g.uniform(0.3, 2.0)});
        const SpectralOperator sq = build_spectral(z.dim(3), g.integer(1, z.dim(3)));
        EXPECT_LE(rel_diff(degrade_spectral(degrade_spatial(z, sp), sq), degrade_spatial(degrade_spectral(z, sq), sp)),
                  1e-13);
    }
}

TEST(Noise, InfiniteSnrIsIdentityAndSeedsAreReproducible) {
    Gen g(7);
    const Tensor3 t = g.tensor({5, 5, 5});
    EXPECT_EQ(add_white_gaussian_noise(t, std::numeric_limits<double>::infinity(), 1), t);
    EXPECT_EQ(add_white_gaussian_noise(t, 20.0, 42), add_white_gaussian_noise(t, 20.0, 42));
    EXPECT_NE(add_white_gaussian_noise(t, 20.0, 42), add_white_gaussian_noise(t, 20.0, 43));
    EXPECT_THROW(add_white_gaussian_noise(Tensor3({2, 2, 2}), 20.0, 1), std::invalid_argument);
    EXPECT_THROW(add_white_gaussian_noise(t, std::nan(""), 1), std::invalid_argument);
}

TEST(Noise, RealizedSnrNearTarget) {
    const Tensor3 t({100, 100, 10}, 1.0);
    for (double snr : {10.0, 20.0, 30.0}) {
        const Tensor3 noisy = add_white_gaussian_noise(t, snr, 5);
        const double realized = 10.0 * std::log10(squared_norm(t) / squared_norm(noisy - t));
        EXPECT_NEAR(realized, snr, 0.5);
    }
}
