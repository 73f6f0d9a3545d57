#pragma once

// Fusion quality metrics of a reconstruction zhat against ground truth z.

#include "ttdsr/io.hpp"
#include "ttdsr/tensor.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace ttdsr {

struct QualityReport {
    double r_snr_db = 0.0;
    double cc = 0.0;
    double sam_deg = 0.0;
    double sam_rad = 0.0;
    double ergas = 0.0;
    double wall_time_s = 0.0;
    Index excluded_fibers = 0;
    Index excluded_slices = 0;
};

namespace detail {

inline void require_same_dims(const Tensor3& z, const Tensor3& zhat, const char* who) {
    if (z.dims() != zhat.dims()) {
        throw std::invalid_argument(std::string(who) + ": dims " + dims_string(z.dims()) + " vs " +
                                    dims_string(zhat.dims()));
    }
}

}  // namespace detail

/// 10 log10(||z||^2 / ||zhat - z||^2); +inf when the residual is exactly zero.
inline double r_snr(const Tensor3& z, const Tensor3& zhat) {
    detail::require_same_dims(z, zhat, "r_snr");
    const double signal = squared_norm(z);
    if (signal == 0.0) throw std::invalid_argument("r_snr: reference has zero norm");
    double residual = 0.0;
    for (Index n = 0; n < z.size(); ++n) {
        const double e = zhat.data()[n] - z.data()[n];
        residual += e * e;
    }
    if (residual == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / residual);
}

struct CcResult {
    double value;
    Index excluded_slices;
};

/// Mean Pearson correlation over frontal slices. Slices where either input
/// is constant have no correlation and are left out of the mean.
inline CcResult cc_detail(const Tensor3& z, const Tensor3& zhat) {
    detail::require_same_dims(z, zhat, "cc");
    const Index n3 = z.dims()[2];
    double total = 0.0;
    Index used = 0;
    for (Index k = 0; k < n3; ++k) {
        const auto x = z.frontal_slice(k).array();
        const auto y = zhat.frontal_slice(k).array();
        const double n = static_cast<double>(x.size());
        const auto xc = x - x.sum() / n;
        const auto yc = y - y.sum() / n;
        const double sxx = (xc * xc).sum();
        const double syy = (yc * yc).sum();
        if (sxx == 0.0 || syy == 0.0) continue;
        total += (xc * yc).sum() / std::sqrt(sxx * syy);
        ++used;
    }
    const double value = used > 0 ? total / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    return {value, n3 - used};
}

inline double cc(const Tensor3& z, const Tensor3& zhat) { return cc_detail(z, zhat).value; }

struct SamResult {
    double radians;
    double degrees;
    Index excluded_fibers;
};

/// Mean angle between spectral fibers z(i,j,:) and zhat(i,j,:). Pixels with
/// a zero fiber in either input are skipped.
inline SamResult sam_detail(const Tensor3& z, const Tensor3& zhat) {
    detail::require_same_dims(z, zhat, "sam");
    const Index pixels = z.dims()[0] * z.dims()[1];
    const Index n3 = z.dims()[2];
    const auto zm = z.as_matrix(pixels, n3);
    const auto hm = zhat.as_matrix(pixels, n3);
    double total = 0.0;
    Index used = 0;
    for (Index px = 0; px < pixels; ++px) {
        const double nz = zm.row(px).norm();
        const double nh = hm.row(px).norm();
        if (nz == 0.0 || nh == 0.0) continue;
        // 2 atan2(|u - v|, |u + v|) on unit vectors: exact 0 for equal fibers,
        // where acos of a rounded cosine is not.
        const Eigen::RowVectorXd u = zm.row(px) / nz;
        const Eigen::RowVectorXd v = hm.row(px) / nh;
        total += 2.0 * std::atan2((u - v).norm(), (u + v).norm());
        ++used;
    }
    const double rad = used > 0 ? total / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    return {rad, rad * 180.0 / std::numbers::pi, pixels - used};
}

inline double sam(const Tensor3& z, const Tensor3& zhat) { return sam_detail(z, zhat).degrees; }

/// (100/d) sqrt( (1/(m1 m2 n3)) sum_k ||zhat_k - z_k||^2 / mu_k^2 ), where
/// mu_k is the mean of the estimated slice zhat(:,:,k).
inline double ergas(const Tensor3& z, const Tensor3& zhat, double d) {
    detail::require_same_dims(z, zhat, "ergas");
    if (!(d > 0)) throw std::invalid_argument("ergas: ratio d must be positive");
    double acc = 0.0;
    for (Index k = 0; k < z.dims()[2]; ++k) {
        const auto est = zhat.frontal_slice(k);
        const double mean = est.mean();
        if (mean == 0.0) throw std::invalid_argument("ergas: estimated slice " + std::to_string(k) + " has zero mean");
        acc += (est - z.frontal_slice(k)).squaredNorm() / (mean * mean);
    }
    return 100.0 / d * std::sqrt(acc / static_cast<double>(z.size()));
}

inline QualityReport evaluate(const Tensor3& z, const Tensor3& zhat, double d, double wall_time_s = 0.0) {
    QualityReport rep;
    rep.r_snr_db = r_snr(z, zhat);
    const CcResult c = cc_detail(z, zhat);
    rep.cc = c.value;
    rep.excluded_slices = c.excluded_slices;
    const SamResult s = sam_detail(z, zhat);
    rep.sam_rad = s.radians;
    rep.sam_deg = s.degrees;
    rep.excluded_fibers = s.excluded_fibers;
    rep.ergas = ergas(z, zhat, d);
    rep.wall_time_s = wall_time_s;
    return rep;
}

inline constexpr std::string_view report_csv_header = "rsnr_db,cc,sam_deg,ergas,time_s,excluded_fibers,excluded_slices";

inline std::string report_csv_row(const QualityReport& r) {
    return format_double(r.r_snr_db) + "," + format_double(r.cc) + "," + format_double(r.sam_deg) + "," +
           format_double(r.ergas) + "," + format_double(r.wall_time_s) + "," + std::to_string(r.excluded_fibers) +
           "," + std::to_string(r.excluded_slices);
}

inline void write_report_csv(std::ostream& os, const QualityReport& r) {
    os << report_csv_header << '\n' << report_csv_row(r) << '\n';
}

}  // namespace ttdsr
