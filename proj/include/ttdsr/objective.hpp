#pragma once

// Regularized fusion objective
//   f(A,B,C) = ||Yh - [[A x1 P1, B x2 P2, C]]||^2 + ||Ym - [[A, B, C x3 P3]]||^2
//              + mu (||A||^2 + ||B||^2 + ||C||^2)
// and its gradient, in matrix-variable form (production) and in
// Kronecker-vectorized form (reference for small instances).

#include "ttdsr/tensor.hpp"
#include "ttdsr/triple.hpp"

#include <stdexcept>
#include <string>

namespace ttdsr {

class FusionProblem {
public:
    FusionProblem(Tensor3 yh, Tensor3 ym, Matrix p1, Matrix p2, Matrix p3, double mu, Index rank)
        : yh_(std::move(yh)), ym_(std::move(ym)), p1_(std::move(p1)), p2_(std::move(p2)), p3_(std::move(p3)),
          mu_(mu), rank_(rank) {
        const Dims& h = yh_.dims();
        const Dims& m = ym_.dims();
        auto fail = [&](const std::string& what) {
            throw std::invalid_argument("FusionProblem: " + what + " (Yh " + dims_string(h) + ", Ym " +
                                        dims_string(m) + ")");
        };
        if (!(mu_ >= 0.0)) fail("mu must be nonnegative");
        if (rank_ < 1) fail("rank must be >= 1");
        if (p1_.rows() != h[0] || p1_.cols() != m[0]) fail("P1 must be n1 x m1");
        if (p2_.rows() != h[1] || p2_.cols() != m[1]) fail("P2 must be n2 x m2");
        if (p3_.rows() != m[2] || p3_.cols() != h[2]) fail("P3 must be m3 x n3");
    }

    const Tensor3& yh() const noexcept { return yh_; }
    const Tensor3& ym() const noexcept { return ym_; }
    const Matrix& p1() const noexcept { return p1_; }
    const Matrix& p2() const noexcept { return p2_; }
    const Matrix& p3() const noexcept { return p3_; }
    double mu() const noexcept { return mu_; }
    Index rank() const noexcept { return rank_; }

    /// (m1, m2, n3) of the super-resolution image.
    Dims sri_dims() const noexcept { return {ym_.dims()[0], ym_.dims()[1], yh_.dims()[2]}; }

    void check_factors(const TripleFactors& f) const {
        if (f.rank() != rank_ || f.output_dims() != sri_dims()) {
            throw std::invalid_argument("FusionProblem: factors of rank " + std::to_string(f.rank()) +
                                        " for " + dims_string(f.output_dims()) + " do not match rank " +
                                        std::to_string(rank_) + " for " + dims_string(sri_dims()));
        }
    }

private:
    Tensor3 yh_;
    Tensor3 ym_;
    Matrix p1_;
    Matrix p2_;
    Matrix p3_;
    double mu_;
    Index rank_;
};

struct FactorGradient {
    Tensor3 da;
    Tensor3 db;
    Tensor3 dc;
};

/// Per-evaluation intermediates. The matrices are
///   D1 = (E_m (x) K_{n x n2l})(C_{lm x n3} (x) E_{n2})
///   E1 = (E_m (x) B_{n x m2l})(G_{lm x m3} (x) E_{m2})
///   F1 = (E_n (x) C_{l x n3m})(H_{mn x n1} (x) E_{n3})
///   G1 = (E_n (x) G_{l x m3m})(A_{mn x m1} (x) E_{m3})
///   H1 = (E_m (x) K_{l x n2n})(H_{nm x n1} (x) E_{n2})
///   K1 = (E_m (x) B_{l x m2n})(A_{nm x m1} (x) E_{m2})
/// with H = A x1 P1, K = B x2 P2, G = C x3 P3.
struct HelperMats {
    Tensor3 h;
    Tensor3 k;
    Tensor3 g;
    Matrix d1, e1, f1, g1, h1, k1;
};

/// Only the matrices needed for the requested objective path are filled
/// unless `all` is set.
inline HelperMats compute_helpers(const FusionProblem& p, const TripleFactors& f, bool all = true, int path = 1) {
    p.check_factors(f);
    const Index r = f.rank();
    const Dims yh = p.yh().dims();
    const Dims ym = p.ym().dims();
    HelperMats m;
    m.h = mode_product(f.a(), p.p1(), 1);
    m.k = mode_product(f.b(), p.p2(), 2);
    m.g = mode_product(f.c(), p.p3(), 3);
    if (all || path == 1) {
        m.d1 = identity_kron_product(unfold(m.k, layout::b_n_m2l), unfold(f.c(), layout::c_n3_lm).transpose(), r,
                                     yh[1]);
        m.e1 = identity_kron_product(unfold(f.b(), layout::b_n_m2l), unfold(m.g, layout::c_n3_lm).transpose(), r,
                                     ym[1]);
    }
    if (all || path == 2) {
        m.f1 = identity_kron_product(unfold(f.c(), layout::c_l_n3m), unfold(m.h, layout::a_m1_mn).transpose(), r,
                                     yh[2]);
        m.g1 = identity_kron_product(unfold(m.g, layout::c_l_n3m), unfold(f.a(), layout::a_m1_mn).transpose(), r,
                                     ym[2]);
    }
    if (all || path == 3) {
        m.h1 = identity_kron_product(unfold(m.k, layout::b_l_m2n), unfold(m.h, layout::a_m1_nm).transpose(), r,
                                     yh[1]);
        m.k1 = identity_kron_product(unfold(f.b(), layout::b_l_m2n), unfold(f.a(), layout::a_m1_nm).transpose(), r,
                                     ym[1]);
    }
    return m;
}

inline double regularization(const FusionProblem& p, const TripleFactors& f) {
    return p.mu() * (squared_norm(f.a()) + squared_norm(f.b()) + squared_norm(f.c()));
}

/// f evaluated through the mode-`path` matricization:
///   1: ||P1 A D1 - Yh||^2 + ||A E1 - Ym||^2 over A_{m1 x nm}
///   2: ||P2 B F1 - Yh||^2 + ||B G1 - Ym||^2 over B_{m2 x ln}
///   3: ||C H1 - Yh||^2 + ||P3 C K1 - Ym||^2 over C_{n3 x lm}
/// All three are the same scalar.
inline double objective_value(const FusionProblem& p, const TripleFactors& f, const HelperMats& m, int path = 1) {
    double fit = 0.0;
    switch (path) {
        case 1: {
            const Matrix a = unfold(f.a(), layout::a_m1_nm);
            fit = (p.p1() * a * m.d1 - unfold(p.yh(), layout::z_1_23)).squaredNorm() +
                  (a * m.e1 - unfold(p.ym(), layout::z_1_23)).squaredNorm();
            break;
        }
        case 2: {
            const Matrix b = unfold(f.b(), layout::b_m2_ln);
            fit = (p.p2() * b * m.f1 - unfold(p.yh(), layout::z_2_31)).squaredNorm() +
                  (b * m.g1 - unfold(p.ym(), layout::z_2_31)).squaredNorm();
            break;
        }
        case 3: {
            const Matrix c = unfold(f.c(), layout::c_n3_lm);
            fit = (c * m.h1 - unfold(p.yh(), layout::z_3_21)).squaredNorm() +
                  (p.p3() * c * m.k1 - unfold(p.ym(), layout::z_3_21)).squaredNorm();
            break;
        }
        default:
            throw std::invalid_argument("objective_value: path must be 1, 2 or 3");
    }
    return fit + regularization(p, f);
}

inline double objective_value(const FusionProblem& p, const TripleFactors& f, int path = 1) {
    return objective_value(p, f, compute_helpers(p, f, false, path), path);
}

/// Matrix-form gradient. With R denoting the residuals in the matching
/// unfoldings:
///   dA = 2 (P1^T Rh D1^T + Rm E1^T + mu A)        over A_{m1 x nm}
///   dB = 2 (P2^T Rh F1^T + Rm G1^T + mu B)        over B_{m2 x ln}
///   dC = 2 (Rh H1^T + P3^T Rm K1^T + mu C)        over C_{n3 x lm}
inline FactorGradient gradient(const FusionProblem& p, const TripleFactors& f, const HelperMats& m) {
    const double mu = p.mu();
    const Matrix a = unfold(f.a(), layout::a_m1_nm);
    const Matrix b = unfold(f.b(), layout::b_m2_ln);
    const Matrix c = unfold(f.c(), layout::c_n3_lm);

    const Matrix ra_h = p.p1() * a * m.d1 - unfold(p.yh(), layout::z_1_23);
    const Matrix ra_m = a * m.e1 - unfold(p.ym(), layout::z_1_23);
    const Matrix ga = 2.0 * (p.p1().transpose() * ra_h * m.d1.transpose() + ra_m * m.e1.transpose() + mu * a);

    const Matrix rb_h = p.p2() * b * m.f1 - unfold(p.yh(), layout::z_2_31);
    const Matrix rb_m = b * m.g1 - unfold(p.ym(), layout::z_2_31);
    const Matrix gb = 2.0 * (p.p2().transpose() * rb_h * m.f1.transpose() + rb_m * m.g1.transpose() + mu * b);

    const Matrix rc_h = c * m.h1 - unfold(p.yh(), layout::z_3_21);
    const Matrix rc_m = p.p3() * c * m.k1 - unfold(p.ym(), layout::z_3_21);
    const Matrix gc = 2.0 * (rc_h * m.h1.transpose() + p.p3().transpose() * rc_m * m.k1.transpose() + mu * c);

    return {fold(ga, layout::a_m1_nm, f.a().dims()), fold(gb, layout::b_m2_ln, f.b().dims()),
            fold(gc, layout::c_n3_lm, f.c().dims())};
}

inline FactorGradient gradient(const FusionProblem& p, const TripleFactors& f) {
    return gradient(p, f, compute_helpers(p, f));
}

struct ValueAndGradient {
    double value;
    FactorGradient grad;
};

inline ValueAndGradient value_and_gradient(const FusionProblem& p, const TripleFactors& f) {
    const HelperMats m = compute_helpers(p, f);
    return {objective_value(p, f, m, 1), gradient(p, f, m)};
}

// ---------------------------------------------------------------------------
// Vectorized form

class SizeBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr Index default_kron_budget = 100'000'000;

namespace detail {

inline Matrix eye(Index n) { return Matrix::Identity(n, n); }

// 2 M^T (M x - d)
inline Vector ls_gradient(const Matrix& m, const Vector& x, const Vector& d) {
    return 2.0 * (m.transpose() * (m * x - d));
}

inline Vector flat(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace detail

/// Largest materialized operator, in entries, that gradient_vectorized needs.
inline Index vectorized_footprint(const FusionProblem& p) {
    const Index r = p.rank();
    const Dims h = p.yh().dims();
    const Dims m = p.ym().dims();
    const Index m1 = m[0], m2 = m[1], m3 = m[2], n1 = h[0], n2 = h[1], n3 = h[2];
    const Index candidates[] = {
        (n3 * n1 * n2) * (r * r * m1 * n2),        // C (x) E (x) P1
        (r * n2 * r * m1) * (r * r * m1),          // E (x) K^T (x) E
        (m3 * m1 * m2) * (r * r * m1 * m2),        // G (x) E
        (n1 * n2 * n3) * (r * r * m2 * n3),        // H (x) E (x) P2
        (r * n3 * r * m2) * (r * r * m2),          // E (x) C^T (x) E
        (m1 * m2 * m3) * (r * r * m2 * m3),        // A (x) E
        (n1 * n2 * n3) * (r * r * n2 * n3),        // H (x) E
        (r * n2 * r * n3) * (r * r * n3),          // E (x) K^T (x) E
        (m1 * m2 * m3) * (r * r * m2 * n3),        // A (x) E (x) P3
    };
    Index worst = 0;
    for (Index c : candidates) worst = std::max(worst, c);
    return worst;
}

/// Gradient assembled from vec(X Y Z) = (Z^T (x) X) vec(Y) with every
/// Kronecker factor materialized:
///   d f / d vec(A_{m1 x nm}) = 2 Ma^T (Ma a - dh_a) + 2 Na^T (Na a - dm_a) + 2 mu a
///   Ma = (C_{n3 x lm} (x) E_{n2} (x) P1)(E_m (x) K_{n2l x n} (x) E_{m1})
///   Na = (G_{m3 x lm} (x) E_{m1 m2})(E_m (x) B_{m2l x n} (x) E_{m1})
/// and analogously for b = vec(B_{m2 x ln}) and c = vec(C_{n3 x lm}). The
/// data vectors are vec of the Yh/Ym unfolding matching each block.
inline FactorGradient gradient_vectorized(const FusionProblem& p, const TripleFactors& f,
                                          Index budget = default_kron_budget) {
    p.check_factors(f);
    if (const Index need = vectorized_footprint(p); need > budget) {
        throw SizeBudgetExceeded("gradient_vectorized: needs " + std::to_string(need) +
                                 " matrix entries, budget is " + std::to_string(budget));
    }
    using detail::eye;
    using detail::flat;
    const Index r = f.rank();
    const Dims h = p.yh().dims();
    const Dims md = p.ym().dims();
    const Index m1 = md[0], m2 = md[1], n2 = h[1], n3 = h[2];
    const double mu = p.mu();

    const Tensor3 ht = mode_product(f.a(), p.p1(), 1);
    const Tensor3 kt = mode_product(f.b(), p.p2(), 2);
    const Tensor3 gt = mode_product(f.c(), p.p3(), 3);

    // a-block
    const Vector a = flat(unfold(f.a(), layout::a_m1_nm));
    const Matrix ma = kron(unfold(f.c(), layout::c_n3_lm), kron(eye(n2), p.p1())) *
                      kron(kron(eye(r), unfold(kt, layout::b_n_m2l).transpose()), eye(m1));
    const Matrix na = kron(unfold(gt, layout::c_n3_lm), eye(m1 * m2)) *
                      kron(kron(eye(r), unfold(f.b(), layout::b_n_m2l).transpose()), eye(m1));
    const Vector ga = detail::ls_gradient(ma, a, vectorize(p.yh())) + detail::ls_gradient(na, a, vectorize(p.ym())) +
                      2.0 * mu * a;

    // b-block
    const Vector b = flat(unfold(f.b(), layout::b_m2_ln));
    const Matrix mb = kron(unfold(ht, layout::a_m1_mn), kron(eye(n3), p.p2())) *
                      kron(kron(eye(r), unfold(f.c(), layout::c_l_n3m).transpose()), eye(m2));
    const Matrix nb = kron(unfold(f.a(), layout::a_m1_mn), eye(m2 * md[2])) *
                      kron(kron(eye(r), unfold(gt, layout::c_l_n3m).transpose()), eye(m2));
    const Vector gb = detail::ls_gradient(mb, b, flat(unfold(p.yh(), layout::z_2_31))) +
                      detail::ls_gradient(nb, b, flat(unfold(p.ym(), layout::z_2_31))) + 2.0 * mu * b;

    // c-block
    const Vector c = flat(unfold(f.c(), layout::c_n3_lm));
    const Matrix mc = kron(unfold(ht, layout::a_m1_nm), eye(n2 * n3)) *
                      kron(kron(eye(r), unfold(kt, layout::b_l_m2n).transpose()), eye(n3));
    const Matrix nc = kron(unfold(f.a(), layout::a_m1_nm), kron(eye(m2), p.p3())) *
                      kron(kron(eye(r), unfold(f.b(), layout::b_l_m2n).transpose()), eye(n3));
    const Vector gc = detail::ls_gradient(mc, c, flat(unfold(p.yh(), layout::z_3_21))) +
                      detail::ls_gradient(nc, c, flat(unfold(p.ym(), layout::z_3_21))) + 2.0 * mu * c;

    auto to_tensor = [](const Vector& v, Index rows, const UnfoldSpec& spec, const Dims& dims) {
        return fold(Eigen::Map<const Matrix>(v.data(), rows, v.size() / rows), spec, dims);
    };
    return {to_tensor(ga, m1, layout::a_m1_nm, f.a().dims()), to_tensor(gb, m2, layout::b_m2_ln, f.b().dims()),
            to_tensor(gc, n3, layout::c_n3_lm, f.c().dims())};
}

}  // namespace ttdsr
