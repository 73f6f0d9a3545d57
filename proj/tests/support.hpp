#pragma once

// Random generators and slow reference implementations shared by the tests.
// Nothing here calls the library routine it is meant to check.

#include "ttdsr/objective.hpp"
#include "ttdsr/tensor.hpp"
#include "ttdsr/triple.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <random>
#include <vector>

namespace ttdsr::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ttdsr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Small seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    std::uint64_t seed() { return rng_(); }

    Dims dims(Index max1, Index max2, Index max3) { return {integer(1, max1), integer(1, max2), integer(1, max3)}; }

    Tensor3 tensor(const Dims& d) {
        Tensor3 t(d);
        for (double& v : t.data()) v = normal();
        return t;
    }

    Matrix matrix(Index rows, Index cols) {
        Matrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }

    Vector vector(Index n) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

private:
    std::mt19937_64 rng_;
};

/// Direct contraction loop: out(..., a, ...) = sum_s m(a, s) t(..., s, ...).
inline Tensor3 brute_mode_product(const Tensor3& t, const Matrix& m, int k) {
    Dims d = t.dims();
    Dims od = d;
    od[k - 1] = m.rows();
    Tensor3 out(od);
    for (Index i = 0; i < od[0]; ++i)
        for (Index j = 0; j < od[1]; ++j)
            for (Index l = 0; l < od[2]; ++l) {
                double acc = 0.0;
                for (Index s = 0; s < d[k - 1]; ++s) {
                    const Index ii = k == 1 ? s : i, jj = k == 2 ? s : j, ll = k == 3 ? s : l;
                    const Index a = k == 1 ? i : (k == 2 ? j : l);
                    acc += m(a, s) * t(ii, jj, ll);
                }
                out(i, j, l) = acc;
            }
    return out;
}

/// Entry-by-entry Kronecker product.
inline Matrix brute_kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < out.cols(); ++j)
            out(i, j) = a(i / b.rows(), j / b.cols()) * b(i % b.rows(), j % b.cols());
    return out;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline double rel_diff(const Matrix& a, const Matrix& b) {
    const double scale = std::max(max_abs(b), 1e-300);
    return max_abs(a - b) / scale;
}

inline double rel_diff(const Tensor3& a, const Tensor3& b) {
    return max_abs_diff(a, b) / std::max(frobenius_norm(b), 1e-300);
}

/// Inverse-Hessian approximation from recursive dense BFGS updates
///   H <- (I - rho s y') H (I - rho y s') + rho s s'
/// starting from gamma I; pairs with rho == 0 are skipped.
inline Matrix dense_bfgs_inverse(Index n, const std::vector<Vector>& s, const std::vector<Vector>& y,
                                 const std::vector<double>& rho, double gamma) {
    Matrix h = gamma * Matrix::Identity(n, n);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (rho[i] == 0.0) continue;
        const Matrix v = Matrix::Identity(n, n) - rho[i] * y[i] * s[i].transpose();
        h = v.transpose() * h * v + rho[i] * s[i] * s[i].transpose();
    }
    return h;
}

/// Reconstruction written directly from the sum, independent of the library.
inline Tensor3 oracle_reconstruct(const Tensor3& a, const Tensor3& b, const Tensor3& c) {
    const Index m1 = a.dims()[0], m2 = b.dims()[1], n3 = c.dims()[2], r = a.dims()[1];
    Tensor3 z({m1, m2, n3});
    for (Index i = 0; i < m1; ++i)
        for (Index j = 0; j < m2; ++j)
            for (Index k = 0; k < n3; ++k) {
                double acc = 0.0;
                for (Index t = 0; t < r; ++t)
                    for (Index p = 0; p < r; ++p)
                        for (Index q = 0; q < r; ++q) acc += a(i, p, q) * b(t, j, q) * c(t, p, k);
                z(i, j, k) = acc;
            }
    return z;
}

/// Fusion objective from the elementwise sum and loop mode products.
inline double oracle_objective(const FusionProblem& p, const TripleFactors& f) {
    const Tensor3 zh = oracle_reconstruct(brute_mode_product(f.a(), p.p1(), 1), brute_mode_product(f.b(), p.p2(), 2), f.c());
    const Tensor3 zm = oracle_reconstruct(f.a(), f.b(), brute_mode_product(f.c(), p.p3(), 3));
    double v = 0.0;
    for (Index n = 0; n < zh.size(); ++n) v += std::pow(zh.data()[n] - p.yh().data()[n], 2);
    for (Index n = 0; n < zm.size(); ++n) v += std::pow(zm.data()[n] - p.ym().data()[n], 2);
    for (const Tensor3* t : {&f.a(), &f.b(), &f.c()})
        for (double x : t->values()) v += p.mu() * x * x;
    return v;
}

}  // namespace ttdsr::testing
