#include "support.hpp"

#include "ttdsr/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace ttdsr;
using ttdsr::testing::brute_kron;
using ttdsr::testing::brute_mode_product;
using ttdsr::testing::Gen;
using ttdsr::testing::rel_diff;

namespace {

Tensor3 iota_tensor(const Dims& d) {
    std::vector<double> v(static_cast<std::size_t>(d[0] * d[1] * d[2]));
    std::iota(v.begin(), v.end(), 1.0);
    return Tensor3(d, v);
}

}  // namespace

TEST(Tensor3, LayoutIsLeftIndexFastest) {
    const Tensor3 t = iota_tensor({2, 3, 4});
    // 1-based (i,j,k) at i + (j-1) n1 + (k-1) n1 n2
    for (Index i = 1; i <= 2; ++i)
        for (Index j = 1; j <= 3; ++j)
            for (Index k = 1; k <= 4; ++k)
                EXPECT_EQ(t(i - 1, j - 1, k - 1), static_cast<double>(i + (j - 1) * 2 + (k - 1) * 6));
}

TEST(Tensor3, RejectsBadConstruction) {
    EXPECT_THROW(Tensor3({0, 2, 2}), std::invalid_argument);
    EXPECT_THROW(Tensor3({2, 2, 2}, std::vector<double>(7)), std::invalid_argument);
}

TEST(Tensor3, ArithmeticChecksDims) {
    Tensor3 a({2, 2, 2}, 1.0);
    const Tensor3 b({2, 2, 3}, 1.0);
    EXPECT_THROW(a += b, std::invalid_argument);
    EXPECT_EQ((a + a)(1, 1, 1), 2.0);
    EXPECT_EQ((3.0 * a)(0, 1, 0), 3.0);
}

TEST(ModeProduct, IdentityLeavesTensorUnchanged) {
    Gen g(1);
    const Tensor3 t = g.tensor({3, 4, 5});
    EXPECT_EQ(mode_product(t, Matrix::Identity(4, 4), 2), t);
}

TEST(ModeProduct, OnesTimesOnes) {
    const Tensor3 t({2, 2, 2}, 1.0);
    const Tensor3 out = mode_product(t, Matrix::Ones(2, 2), 1);
    for (double v : out.values()) EXPECT_EQ(v, 2.0);
}

TEST(ModeProduct, MatchesContractionLoop) {
    Gen g(2);
    for (int trial = 0; trial < 30; ++trial) {
        const Tensor3 t = g.tensor(g.dims(5, 5, 5));
        const int k = static_cast<int>(g.integer(1, 3));
        const Matrix m = g.matrix(g.integer(1, 6), t.dim(k));
        const Tensor3 got = mode_product(t, m, k);
        const Tensor3 want = brute_mode_product(t, m, k);
        ASSERT_EQ(got.dims(), want.dims());
        EXPECT_LE(rel_diff(got, want), 1e-13);
    }
}

TEST(ModeProduct, CommutesOnDistinctModes) {
    Gen g(3);
    const Tensor3 t = g.tensor({3, 4, 5});
    const Matrix f = g.matrix(6, 3);
    const Matrix h = g.matrix(7, 4);
    const Tensor3 fg = brute_mode_product(brute_mode_product(t, f, 1), h, 2);
    EXPECT_LE(rel_diff(mode_product(mode_product(t, f, 1), h, 2), fg), 1e-13);
    EXPECT_LE(rel_diff(mode_product(mode_product(t, h, 2), f, 1), fg), 1e-13);
}

TEST(ModeProduct, PropertyCommutationAndComposition) {
    Gen g(4);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor3 t = g.tensor(g.dims(5, 5, 5));
        const int p = static_cast<int>(g.integer(1, 3));
        const int q = p % 3 + 1;
        const Matrix f = g.matrix(g.integer(1, 5), t.dim(p));
        const Matrix h = g.matrix(g.integer(1, 5), t.dim(q));
        EXPECT_LE(rel_diff(mode_product(mode_product(t, f, p), h, q), mode_product(mode_product(t, h, q), f, p)),
                  1e-13);
        const Matrix f2 = g.matrix(g.integer(1, 5), f.rows());
        EXPECT_LE(rel_diff(mode_product(mode_product(t, f, p), f2, p), mode_product(t, f2 * f, p)), 1e-13);
    }
}

TEST(ModeProduct, ViaUnfoldingMatchesLoop) {
    Gen g(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor3 t = g.tensor(g.dims(5, 5, 5));
        const int k = static_cast<int>(g.integer(1, 3));
        const Matrix m = g.matrix(g.integer(1, 4), t.dim(k));
        const UnfoldSpec spec{k, k % 3 + 1, (k + 1) % 3 + 1};
        Dims od = t.dims();
        od[k - 1] = m.rows();
        const Tensor3 via = fold(m * unfold(t, spec), spec, od);
        EXPECT_LE(rel_diff(via, brute_mode_product(t, m, k)), 1e-13);
    }
}

TEST(ModeProduct, MismatchNamesModeAndSizes) {
    const Tensor3 t({3, 4, 5});
    try {
        mode_product(t, Matrix::Zero(2, 3), 2);
        FAIL() << "expected throw";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("mode 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find('4'), std::string::npos) << msg;
        EXPECT_NE(msg.find('3'), std::string::npos) << msg;
    }
    EXPECT_THROW(mode_product(t, Matrix::Zero(2, 3), 4), std::invalid_argument);
}

TEST(Unfold, TwoByTwoByTwoExample) {
    const Tensor3 t = iota_tensor({2, 2, 2});
    Matrix want(2, 4);
    want << 1, 3, 5, 7, 2, 4, 6, 8;
    EXPECT_EQ(unfold(t, {1, 2, 3}), want);
}

TEST(Unfold, ModeThreeIsTransposeOfStackedRows) {
    Gen g(6);
    const Tensor3 t = g.tensor({3, 4, 5});
    const Matrix m3 = unfold(t, {3, 1, 2});
    // A_{n1n2 x n3}: row i + j n1, column k
    Matrix stacked(12, 5);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 4; ++j)
            for (Index k = 0; k < 5; ++k) stacked(i + j * 3, k) = t(i, j, k);
    EXPECT_EQ(m3, stacked.transpose());
    EXPECT_EQ(m3.transpose(), t.as_matrix(12, 5));
}

TEST(Unfold, PlacementFollowsIndexRule) {
    Gen g(7);
    const Tensor3 t = g.tensor({3, 4, 5});
    // A_{n1 x n3n2}: column k + j n3
    const Matrix m = unfold(t, {1, 3, 2});
    ASSERT_EQ(m.rows(), 3);
    ASSERT_EQ(m.cols(), 20);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 4; ++j)
            for (Index k = 0; k < 5; ++k) EXPECT_EQ(m(i, k + j * 5), t(i, j, k));
}

TEST(Unfold, AllSixRoundTripBitExact) {
    Gen g(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor3 t = g.tensor(g.dims(5, 5, 5));
        for (const UnfoldSpec& s : all_unfold_specs) {
            const Matrix m = unfold(t, s);
            EXPECT_EQ(m.rows(), t.dim(s.row));
            EXPECT_EQ(fold(m, s, t.dims()), t);
            EXPECT_EQ(unfold(fold(m, s, t.dims()), s), m);
            EXPECT_DOUBLE_EQ(m.norm(), frobenius_norm(t));
        }
    }
}

TEST(Fold, ZeroAndScalarCases) {
    EXPECT_EQ(fold(Matrix::Zero(2, 12), {1, 2, 3}, {2, 3, 4}), Tensor3({2, 3, 4}));
    Matrix one(1, 1);
    one(0, 0) = 4.5;
    for (const UnfoldSpec& s : all_unfold_specs) EXPECT_EQ(fold(one, s, {1, 1, 1})(0, 0, 0), 4.5);
}

TEST(Fold, RejectsInconsistentShapes) {
    EXPECT_THROW(fold(Matrix::Zero(2, 11), {1, 2, 3}, {2, 3, 4}), std::invalid_argument);
    EXPECT_THROW(unfold(Tensor3({2, 2, 2}), {1, 1, 3}), std::invalid_argument);
}

TEST(Kron, IdentityGivesBlockDiagonal) {
    Gen g(9);
    const Matrix x = g.matrix(2, 3);
    const Matrix k = kron(Matrix::Identity(2, 2), x);
    EXPECT_EQ(k.block(0, 0, 2, 3), x);
    EXPECT_EQ(k.block(2, 3, 2, 3), x);
    EXPECT_EQ(k.block(0, 3, 2, 3), Matrix::Zero(2, 3));
    EXPECT_EQ(k.block(2, 0, 2, 3), Matrix::Zero(2, 3));
}

TEST(Kron, HandExample) {
    Matrix a(1, 2), b(2, 1), want(2, 2);
    a << 1, 2;
    b << 3, 4;
    want << 3, 6, 4, 8;
    EXPECT_EQ(kron(a, b), want);
}

TEST(Kron, VecIdentityAndMixedProduct) {
    Gen g(10);
    for (int trial = 0; trial < 20; ++trial) {
        const Index p = g.integer(1, 4), q = g.integer(1, 4), m = g.integer(1, 4), n = g.integer(1, 4);
        const Matrix a = g.matrix(p, q), b = g.matrix(m, n), x = g.matrix(n, q);
        const Matrix bxa = b * x * a.transpose();
        const Vector lhs = Eigen::Map<const Vector>(bxa.data(), bxa.size());
        const Vector rhs = kron(a, b) * Eigen::Map<const Vector>(x.data(), x.size());
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, lhs.cwiseAbs().maxCoeff()));

        EXPECT_EQ(kron(a, b), brute_kron(a, b));
        const Matrix c = g.matrix(q, g.integer(1, 3)), d = g.matrix(n, g.integer(1, 3));
        EXPECT_LE(rel_diff(kron(a, b) * kron(c, d), kron(a * c, b * d)), 1e-12);
    }
}

TEST(IdentityKronProduct, MatchesMaterializedFactors) {
    Gen g(11);
    for (int trial = 0; trial < 30; ++trial) {
        const Index a = g.integer(1, 4), rep = g.integer(1, 4), inner = g.integer(1, 4);
        const Index blocks = g.integer(1, 4), c = g.integer(1, 4);
        const Matrix x = g.matrix(a, rep * inner);
        const Matrix y = g.matrix(inner * blocks, c);
        const Matrix want = brute_kron(Matrix::Identity(blocks, blocks), x) * brute_kron(y, Matrix::Identity(rep, rep));
        EXPECT_LE(rel_diff(identity_kron_product(x, y, blocks, rep), want), 1e-13);
    }
}

TEST(Vectorize, LayoutOrderAndNorm) {
    const Tensor3 t({2, 2, 1}, std::vector<double>{1, 2, 3, 4});
    Vector want(4);
    want << 1, 2, 3, 4;
    EXPECT_EQ(vectorize(t), want);
    EXPECT_EQ(vectorize(Tensor3({2, 3, 1})), Vector::Zero(6));

    Gen g(12);
    const Tensor3 r = g.tensor({4, 5, 6});
    double acc = 0.0;
    for (Index k = 0; k < 6; ++k)
        for (Index j = 0; j < 5; ++j)
            for (Index i = 0; i < 4; ++i) acc += r(i, j, k) * r(i, j, k);
    EXPECT_NEAR(vectorize(r).norm(), std::sqrt(acc), 1e-15 * std::sqrt(acc));
}

TEST(FrobeniusNorm, Basics) {
    EXPECT_DOUBLE_EQ(frobenius_norm(Tensor3({2, 3, 4}, 1.0)), std::sqrt(24.0));
    EXPECT_EQ(frobenius_norm(Tensor3({2, 3, 4})), 0.0);
    Gen g(13);
    const Tensor3 t = g.tensor({3, 4, 5});
    for (const UnfoldSpec& s : all_unfold_specs) EXPECT_NEAR(unfold(t, s).norm(), frobenius_norm(t), 1e-13);
}
