#pragma once

// Spatial (blur + downsample) and spectral (band averaging) degradation of
// a super-resolution image, plus seeded white Gaussian noise.

#include "ttdsr/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace ttdsr {

struct SpatialParams {
    Index d = 4;      // downsampling ratio
    Index q = 9;      // blur taps (odd)
    double sigma = 0; // kernel std in pixels; <= 0 selects q / 6

    double effective_sigma() const { return sigma > 0 ? sigma : static_cast<double>(q) / 6.0; }
    /// 1-based position of the first sampled pixel in each block.
    Index offset() const { return (d + 1) / 2; }
};

struct SpatialOperator {
    Matrix p1;  // n1 x m1
    Matrix p2;  // n2 x m2
    SpatialParams params;
};

struct SpectralOperator {
    Matrix p3;  // m3 x n3
    std::vector<std::pair<Index, Index>> band_ranges;  // [first, last) per output band, 0-based
};

namespace detail {

// Half-sample symmetric reflection into [0, m).
inline Index reflect_index(Index i, Index m) {
    const Index period = 2 * m;
    i %= period;
    if (i < 0) i += period;
    return i < m ? i : period - 1 - i;
}

}  // namespace detail

/// m x m Gaussian blur with q taps, truncated, renormalized and mirrored at
/// the borders. Each row sums to one. Taps that reach past the image (q > m)
/// keep reflecting, so the support never leaves [0, m).
inline Matrix gaussian_blur_matrix(Index m, Index q, double sigma) {
    if (m <= 0) throw std::invalid_argument("gaussian_blur_matrix: size must be positive");
    if (q <= 0 || q % 2 == 0) throw std::invalid_argument("gaussian_blur_matrix: q must be odd and positive");
    const Index half = q / 2;
    std::vector<double> taps(static_cast<std::size_t>(q), 1.0);
    if (q > 1) {
        if (!(sigma > 0)) throw std::invalid_argument("gaussian_blur_matrix: sigma must be positive");
        double total = 0.0;
        for (Index t = -half; t <= half; ++t) {
            const double w = std::exp(-0.5 * static_cast<double>(t * t) / (sigma * sigma));
            taps[static_cast<std::size_t>(t + half)] = w;
            total += w;
        }
        for (double& w : taps) w /= total;
    }
    Matrix k = Matrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index t = -half; t <= half; ++t) k(i, detail::reflect_index(i + t, m)) += taps[static_cast<std::size_t>(t + half)];
    }
    return k;
}

/// (m/d) x m matrix keeping every d-th pixel starting at 1-based offset ceil(d/2).
inline Matrix downsample_matrix(Index m, Index d) {
    if (d <= 0 || m % d != 0) {
        throw std::invalid_argument("downsample_matrix: ratio " + std::to_string(d) + " does not divide " +
                                    std::to_string(m));
    }
    const Index first = (d + 1) / 2 - 1;
    Matrix s = Matrix::Zero(m / d, m);
    for (Index i = 0; i < m / d; ++i) s(i, first + i * d) = 1.0;
    return s;
}

/// P = S * K for one spatial axis of size m.
inline Matrix build_spatial(Index m, const SpatialParams& params) {
    return downsample_matrix(m, params.d) * gaussian_blur_matrix(m, params.q, params.effective_sigma());
}

inline SpatialOperator build_spatial_operator(Index m1, Index m2, const SpatialParams& params) {
    return {build_spatial(m1, params), build_spatial(m2, params), params};
}

/// n3 bands split into m3 contiguous, near-equal groups (earlier groups take
/// the remainder); row j averages group j.
inline SpectralOperator build_spectral(Index n3, Index m3) {
    if (m3 <= 0 || m3 > n3) {
        throw std::invalid_argument("build_spectral: need 0 < m3 <= n3, got m3=" + std::to_string(m3) +
                                    ", n3=" + std::to_string(n3));
    }
    SpectralOperator op;
    op.p3 = Matrix::Zero(m3, n3);
    const Index base = n3 / m3;
    const Index extra = n3 % m3;
    Index first = 0;
    for (Index j = 0; j < m3; ++j) {
        const Index len = base + (j < extra ? 1 : 0);
        for (Index b = first; b < first + len; ++b) op.p3(j, b) = 1.0 / static_cast<double>(len);
        op.band_ranges.emplace_back(first, first + len);
        first += len;
    }
    return op;
}

/// Y_h = Z x_1 P1 x_2 P2.
inline Tensor3 degrade_spatial(const Tensor3& z, const Matrix& p1, const Matrix& p2) {
    if (p1.cols() != z.dims()[0] || p2.cols() != z.dims()[1]) {
        throw std::invalid_argument("degrade_spatial: operators " + std::to_string(p1.rows()) + "x" +
                                    std::to_string(p1.cols()) + ", " + std::to_string(p2.rows()) + "x" +
                                    std::to_string(p2.cols()) + " incompatible with " + dims_string(z.dims()));
    }
    return mode_product(mode_product(z, p1, 1), p2, 2);
}

inline Tensor3 degrade_spatial(const Tensor3& z, const SpatialOperator& op) {
    return degrade_spatial(z, op.p1, op.p2);
}

/// Y_m = Z x_3 P3.
inline Tensor3 degrade_spectral(const Tensor3& z, const Matrix& p3) {
    if (p3.cols() != z.dims()[2]) {
        throw std::invalid_argument("degrade_spectral: P3 has " + std::to_string(p3.cols()) +
                                    " columns, tensor has " + std::to_string(z.dims()[2]) + " bands");
    }
    return mode_product(z, p3, 3);
}

inline Tensor3 degrade_spectral(const Tensor3& z, const SpectralOperator& op) {
    return degrade_spectral(z, op.p3);
}

/// t + n with n ~ N(0, ||t||^2 / (N 10^(snr/10))) i.i.d. An infinite snr
/// returns t unchanged.
inline Tensor3 add_white_gaussian_noise(const Tensor3& t, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return t;
    if (std::isnan(snr_db)) throw std::invalid_argument("add_white_gaussian_noise: snr is NaN");
    const double energy = squared_norm(t);
    if (energy == 0.0) throw std::invalid_argument("add_white_gaussian_noise: input has zero norm");
    const double variance = energy / (static_cast<double>(t.size()) * std::pow(10.0, snr_db / 10.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    Tensor3 out = t;
    for (double& v : out.data()) v += normal(rng);
    return out;
}

}  // namespace ttdsr
