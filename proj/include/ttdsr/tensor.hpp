#pragma once

// Dense third-order tensors in column-major layout (first index fastest)
// and the algebra the fusion model is written in: mode-k products, the six
// unfoldings, Kronecker products.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ttdsr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Dims = std::array<Index, 3>;

inline std::string dims_string(const Dims& d) {
    return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

class Tensor3 {
public:
    Tensor3() = default;

    explicit Tensor3(Dims dims, double fill = 0.0) : dims_(dims) {
        check_dims(dims);
        data_.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), fill);
    }

    Tensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
        check_dims(dims);
        if (static_cast<Index>(data_.size()) != dims[0] * dims[1] * dims[2]) {
            throw std::invalid_argument("Tensor3: data length " + std::to_string(data_.size()) +
                                        " does not match dims " + dims_string(dims));
        }
    }

    const Dims& dims() const noexcept { return dims_; }
    Index dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode - 1)); }
    Index size() const noexcept { return static_cast<Index>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    // 0-based (i, j, k) -> i + j*n1 + k*n1*n2
    Index offset(Index i, Index j, Index k) const noexcept {
        return i + dims_[0] * (j + dims_[1] * k);
    }
    double& operator()(Index i, Index j, Index k) noexcept {
        return data_[static_cast<std::size_t>(offset(i, j, k))];
    }
    double operator()(Index i, Index j, Index k) const noexcept {
        return data_[static_cast<std::size_t>(offset(i, j, k))];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    // Column-major views over the raw storage.
    Eigen::Map<Matrix> as_matrix(Index rows, Index cols) {
        return {data_.data(), rows, cols};
    }
    Eigen::Map<const Matrix> as_matrix(Index rows, Index cols) const {
        return {data_.data(), rows, cols};
    }
    Eigen::Map<Matrix> frontal_slice(Index k) {
        return {data_.data() + k * dims_[0] * dims_[1], dims_[0], dims_[1]};
    }
    Eigen::Map<const Matrix> frontal_slice(Index k) const {
        return {data_.data() + k * dims_[0] * dims_[1], dims_[0], dims_[1]};
    }

    Tensor3& operator+=(const Tensor3& o) {
        require_same_dims(o, "operator+=");
        for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
        return *this;
    }
    Tensor3& operator-=(const Tensor3& o) {
        require_same_dims(o, "operator-=");
        for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
        return *this;
    }
    Tensor3& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }
    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

    bool operator==(const Tensor3& o) const = default;

private:
    static void check_dims(const Dims& d) {
        for (Index n : d) {
            if (n <= 0) throw std::invalid_argument("Tensor3: dims must be positive, got " + dims_string(d));
        }
    }
    void require_same_dims(const Tensor3& o, const char* what) const {
        if (o.dims_ != dims_) {
            throw std::invalid_argument(std::string("Tensor3::") + what + ": dims " + dims_string(dims_) +
                                        " vs " + dims_string(o.dims_));
        }
    }

    Dims dims_{0, 0, 0};
    std::vector<double> data_;
};

/// Which mode indexes the rows of an unfolding, and the order of the two
/// column modes (`fast` varies fastest). Modes are 1-based.
///
/// {1, 2, 3} is A_{n1 x n2n3}: column j + k*n2.
/// {1, 3, 2} is A_{n1 x n3n2}: column k + j*n3.
struct UnfoldSpec {
    int row = 1;
    int fast = 2;
    int slow = 3;

    constexpr bool valid() const noexcept {
        auto in_range = [](int m) { return m >= 1 && m <= 3; };
        return in_range(row) && in_range(fast) && in_range(slow) && row != fast && row != slow &&
               fast != slow;
    }
    bool operator==(const UnfoldSpec&) const = default;
};

inline constexpr std::array<UnfoldSpec, 6> all_unfold_specs{{
    {1, 2, 3}, {1, 3, 2}, {2, 3, 1}, {2, 1, 3}, {3, 1, 2}, {3, 2, 1},
}};

namespace detail {

inline void require_valid(const UnfoldSpec& s) {
    if (!s.valid()) {
        throw std::invalid_argument("UnfoldSpec: modes (" + std::to_string(s.row) + "; " +
                                    std::to_string(s.fast) + "," + std::to_string(s.slow) +
                                    ") are not a permutation of {1,2,3}");
    }
}

inline void require_mode(int k) {
    if (k < 1 || k > 3) throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(k));
}

}  // namespace detail

inline Matrix unfold(const Tensor3& t, const UnfoldSpec& spec) {
    detail::require_valid(spec);
    const Dims& d = t.dims();
    const Index rows = d[spec.row - 1];
    const Index fast_n = d[spec.fast - 1];
    Matrix m(rows, t.size() / rows);
    std::array<Index, 3> idx{};
    for (idx[2] = 0; idx[2] < d[2]; ++idx[2]) {
        for (idx[1] = 0; idx[1] < d[1]; ++idx[1]) {
            for (idx[0] = 0; idx[0] < d[0]; ++idx[0]) {
                m(idx[spec.row - 1], idx[spec.fast - 1] + idx[spec.slow - 1] * fast_n) =
                    t(idx[0], idx[1], idx[2]);
            }
        }
    }
    return m;
}

inline Tensor3 fold(const Matrix& m, const UnfoldSpec& spec, const Dims& dims) {
    detail::require_valid(spec);
    Tensor3 t(dims);
    const Index rows = dims[spec.row - 1];
    if (m.rows() != rows || m.cols() * rows != t.size()) {
        throw std::invalid_argument("fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                    " inconsistent with dims " + dims_string(dims));
    }
    const Index fast_n = dims[spec.fast - 1];
    std::array<Index, 3> idx{};
    for (idx[2] = 0; idx[2] < dims[2]; ++idx[2]) {
        for (idx[1] = 0; idx[1] < dims[1]; ++idx[1]) {
            for (idx[0] = 0; idx[0] < dims[0]; ++idx[0]) {
                t(idx[0], idx[1], idx[2]) =
                    m(idx[spec.row - 1], idx[spec.fast - 1] + idx[spec.slow - 1] * fast_n);
            }
        }
    }
    return t;
}

/// t x_k m: contracts mode k of `t` against the columns of `m`.
inline Tensor3 mode_product(const Tensor3& t, const Matrix& m, int k) {
    detail::require_mode(k);
    const Dims& d = t.dims();
    if (m.cols() != d[k - 1]) {
        throw std::invalid_argument("mode_product: mode " + std::to_string(k) + " has size " +
                                    std::to_string(d[k - 1]) + " but matrix has " + std::to_string(m.cols()) +
                                    " columns");
    }
    Dims out_dims = d;
    out_dims[k - 1] = m.rows();
    Tensor3 out(out_dims);
    switch (k) {
        case 1:
            out.as_matrix(m.rows(), d[1] * d[2]).noalias() = m * t.as_matrix(d[0], d[1] * d[2]);
            break;
        case 2:
            for (Index s = 0; s < d[2]; ++s) out.frontal_slice(s).noalias() = t.frontal_slice(s) * m.transpose();
            break;
        default:
            out.as_matrix(d[0] * d[1], m.rows()).noalias() = t.as_matrix(d[0] * d[1], d[2]) * m.transpose();
            break;
    }
    return out;
}

/// b (x) c with entry d_{gh} = b_{ij} c_{st}, g = s + i*p, h = t + j*q (0-based).
inline Matrix kron(const Matrix& b, const Matrix& c) {
    const Index p = c.rows();
    const Index q = c.cols();
    Matrix out(b.rows() * p, b.cols() * q);
    for (Index j = 0; j < b.cols(); ++j) {
        for (Index i = 0; i < b.rows(); ++i) out.block(i * p, j * q, p, q) = b(i, j) * c;
    }
    return out;
}

/// (E_blocks (x) x) * (y (x) E_rep) evaluated blockwise.
///
/// x is a x (rep*inner), y is (inner*blocks) x c; the result is
/// (blocks*a) x (c*rep) with entry [a' + p*a, s + k*rep] =
/// sum_t x(a', s + t*rep) * y(t + p*inner, k).
inline Matrix identity_kron_product(const Matrix& x, const Matrix& y, Index blocks, Index rep) {
    if (blocks <= 0 || rep <= 0 || y.rows() % blocks != 0) {
        throw std::invalid_argument("identity_kron_product: y rows not divisible by block count");
    }
    const Index inner = y.rows() / blocks;
    if (x.cols() != rep * inner) {
        throw std::invalid_argument("identity_kron_product: x has " + std::to_string(x.cols()) +
                                    " columns, expected " + std::to_string(rep * inner));
    }
    const Index a = x.rows();
    Matrix out = Matrix::Zero(blocks * a, y.cols() * rep);
    for (Index p = 0; p < blocks; ++p) {
        for (Index k = 0; k < y.cols(); ++k) {
            for (Index t = 0; t < inner; ++t) {
                const double w = y(t + p * inner, k);
                if (w == 0.0) continue;
                out.block(p * a, k * rep, a, rep) += w * x.middleCols(t * rep, rep);
            }
        }
    }
    return out;
}

inline Vector vectorize(const Tensor3& t) {
    return Eigen::Map<const Vector>(t.data().data(), t.size());
}

inline double squared_norm(const Tensor3& t) {
    double acc = 0.0;
    for (double v : t.data()) acc += v * v;
    return acc;
}

inline double frobenius_norm(const Tensor3& t) { return std::sqrt(squared_norm(t)); }

inline double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    if (a.dims() != b.dims()) throw std::invalid_argument("max_abs_diff: dims differ");
    double m = 0.0;
    for (Index n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a.data()[n] - b.data()[n]));
    return m;
}

}  // namespace ttdsr
