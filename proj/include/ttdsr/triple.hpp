#pragma once

// Low-rank triple decomposition Z = [[A, B, C]] with
//   A: m1 x r x r,  B: r x m2 x r,  C: r x r x n3,
//   Z(i,j,k) = sum_{t,p,q} A(i,p,q) B(t,j,q) C(t,p,k).

#include "ttdsr/tensor.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdint>
#include <random>

namespace ttdsr {

/// Named unfoldings of the factor tensors. Every conversion between the
/// matrix-variable form of the model and Tensor3 storage goes through these.
///
/// Naming follows the matrix subscripts: for A (m1 x m x n), `a_m1_nm` is
/// A_{m1 x nm}, i.e. rows i, columns q + p*n.
namespace layout {
// A: modes (i, p, q) with sizes (m1, m, n)
inline constexpr UnfoldSpec a_m1_nm{1, 3, 2};
inline constexpr UnfoldSpec a_m1_mn{1, 2, 3};
// B: modes (t, j, q) with sizes (l, m2, n)
inline constexpr UnfoldSpec b_m2_ln{2, 1, 3};
inline constexpr UnfoldSpec b_n_m2l{3, 2, 1};
inline constexpr UnfoldSpec b_l_m2n{1, 2, 3};
// C: modes (t, p, k) with sizes (l, m, n3)
inline constexpr UnfoldSpec c_n3_lm{3, 1, 2};
inline constexpr UnfoldSpec c_l_n3m{1, 3, 2};
// Z and the observations: modes (i, j, k)
inline constexpr UnfoldSpec z_1_23{1, 2, 3};
inline constexpr UnfoldSpec z_2_31{2, 3, 1};
inline constexpr UnfoldSpec z_3_21{3, 2, 1};
}  // namespace layout

class TripleFactors {
public:
    TripleFactors(Tensor3 a, Tensor3 b, Tensor3 c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
        const Index r = a_.dims()[1];
        const bool ok = r > 0 && a_.dims()[2] == r && b_.dims()[0] == r && b_.dims()[2] == r &&
                        c_.dims()[0] == r && c_.dims()[1] == r;
        if (!ok) {
            throw std::invalid_argument("TripleFactors: shapes " + dims_string(a_.dims()) + ", " +
                                        dims_string(b_.dims()) + ", " + dims_string(c_.dims()) +
                                        " do not share one rank r");
        }
        rank_ = r;
        if (rank_ > rank_bound(output_dims())) {
            spdlog::warn("triple rank {} exceeds median of dims {} ({})", rank_, dims_string(output_dims()),
                         rank_bound(output_dims()));
        }
    }

    /// Median of (m1, m2, n3): ranks above it are not minimal.
    static Index rank_bound(const Dims& d) {
        Dims s = d;
        std::sort(s.begin(), s.end());
        return s[1];
    }

    Index rank() const noexcept { return rank_; }
    Dims output_dims() const noexcept { return {a_.dims()[0], b_.dims()[1], c_.dims()[2]}; }
    Index parameter_count() const noexcept { return a_.size() + b_.size() + c_.size(); }

    const Tensor3& a() const noexcept { return a_; }
    const Tensor3& b() const noexcept { return b_; }
    const Tensor3& c() const noexcept { return c_; }
    Tensor3& a() noexcept { return a_; }
    Tensor3& b() noexcept { return b_; }
    Tensor3& c() noexcept { return c_; }

    bool operator==(const TripleFactors&) const = default;

private:
    Tensor3 a_;
    Tensor3 b_;
    Tensor3 c_;
    Index rank_ = 0;
};

inline Dims a_dims(const Dims& out, Index r) { return {out[0], r, r}; }
inline Dims b_dims(const Dims& out, Index r) { return {r, out[1], r}; }
inline Dims c_dims(const Dims& out, Index r) { return {r, r, out[2]}; }

/// Direct six-index evaluation of Z(i,j,k). Slow; kept as the reference.
inline Tensor3 reconstruct_elementwise(const TripleFactors& f) {
    const Dims out = f.output_dims();
    const Index r = f.rank();
    const Tensor3& a = f.a();
    const Tensor3& b = f.b();
    const Tensor3& c = f.c();
    Tensor3 z(out);
    for (Index k = 0; k < out[2]; ++k) {
        for (Index j = 0; j < out[1]; ++j) {
            for (Index i = 0; i < out[0]; ++i) {
                double acc = 0.0;
                for (Index q = 0; q < r; ++q) {
                    for (Index p = 0; p < r; ++p) {
                        for (Index t = 0; t < r; ++t) acc += a(i, p, q) * b(t, j, q) * c(t, p, k);
                    }
                }
                z(i, j, k) = acc;
            }
        }
    }
    return z;
}

/// Z through one of the three matricized identities:
///   mode 1: Z_{m1 x m2n3} = A_{m1 x nm} (E_m (x) B_{n x m2l}) (C_{lm x n3} (x) E_{m2})
///   mode 2: Z_{m2 x n3m1} = B_{m2 x ln} (E_n (x) C_{l x n3m}) (A_{mn x m1} (x) E_{n3})
///   mode 3: Z_{n3 x m2m1} = C_{n3 x lm} (E_m (x) B_{l x m2n}) (A_{nm x m1} (x) E_{m2})
/// The Kronecker-with-identity products are evaluated blockwise.
inline Tensor3 reconstruct_matricized(const TripleFactors& f, int mode = 1) {
    const Dims out = f.output_dims();
    const Index r = f.rank();
    switch (mode) {
        case 1: {
            const Matrix m = identity_kron_product(unfold(f.b(), layout::b_n_m2l),
                                                   unfold(f.c(), layout::c_n3_lm).transpose(), r, out[1]);
            return fold(unfold(f.a(), layout::a_m1_nm) * m, layout::z_1_23, out);
        }
        case 2: {
            const Matrix m = identity_kron_product(unfold(f.c(), layout::c_l_n3m),
                                                   unfold(f.a(), layout::a_m1_mn).transpose(), r, out[2]);
            return fold(unfold(f.b(), layout::b_m2_ln) * m, layout::z_2_31, out);
        }
        case 3: {
            const Matrix m = identity_kron_product(unfold(f.b(), layout::b_l_m2n),
                                                   unfold(f.a(), layout::a_m1_nm).transpose(), r, out[1]);
            return fold(unfold(f.c(), layout::c_n3_lm) * m, layout::z_3_21, out);
        }
        default:
            throw std::invalid_argument("reconstruct_matricized: mode must be 1, 2 or 3");
    }
}

inline Tensor3 reconstruct(const TripleFactors& f) { return reconstruct_matricized(f, 1); }

/// Tensor with i.i.d. N(0, stddev^2) entries from mt19937_64(seed).
inline Tensor3 random_tensor(const Dims& dims, std::uint64_t seed, double stddev = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    Tensor3 t(dims);
    for (double& v : t.data()) v = normal(rng);
    return t;
}

/// Factors with i.i.d. N(0, stddev^2) entries. A, B, C are drawn in that
/// order from a single mt19937_64 stream.
inline TripleFactors random_factors(const Dims& out, Index r, std::uint64_t seed, double stddev = 1.0) {
    if (r < 1) throw std::invalid_argument("random_factors: rank must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    auto draw = [&](const Dims& d) {
        Tensor3 t(d);
        for (double& v : t.data()) v = normal(rng);
        return t;
    };
    Tensor3 a = draw(a_dims(out, r));
    Tensor3 b = draw(b_dims(out, r));
    Tensor3 c = draw(c_dims(out, r));
    return {std::move(a), std::move(b), std::move(c)};
}

inline TripleFactors zero_factors(const Dims& out, Index r) {
    return {Tensor3(a_dims(out, r)), Tensor3(b_dims(out, r)), Tensor3(c_dims(out, r))};
}

}  // namespace ttdsr
