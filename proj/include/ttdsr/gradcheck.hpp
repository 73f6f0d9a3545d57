#pragma once

// Central-difference check of the analytic gradients, used by the CLI's
// gradcheck subcommand.

#include "ttdsr/degradation.hpp"
#include "ttdsr/lbfgs.hpp"
#include "ttdsr/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ttdsr {

/// max_i |x_i - ref_i| / max(1, ||ref||_inf).
inline double max_relative_error(const Vector& x, const Vector& ref) {
    if (x.size() != ref.size()) throw std::invalid_argument("max_relative_error: length mismatch");
    if (x.size() == 0) return 0.0;
    const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
    return (x - ref).cwiseAbs().maxCoeff() / scale;
}

/// Random instance: dense random Z degraded with d=2, q=3 blur and m3 =
/// ceil(n3/2) bands (falls back to d=1 when a spatial size is odd).
inline FusionProblem random_fusion_problem(const Dims& dims, Index rank, double mu, std::uint64_t seed) {
    SpatialParams sp{2, 3, 0.0};
    if (dims[0] % 2 != 0 || dims[1] % 2 != 0) sp.d = 1;
    const SpatialOperator so = build_spatial_operator(dims[0], dims[1], sp);
    const SpectralOperator sq = build_spectral(dims[2], (dims[2] + 1) / 2);
    const Tensor3 z = random_tensor(dims, seed);
    return {degrade_spatial(z, so), degrade_spectral(z, sq), so.p1, so.p2, sq.p3, mu, rank};
}

inline Vector finite_difference_gradient(const FusionProblem& p, const TripleFactors& f, double h) {
    const Vector x = flatten(f);
    const Dims out = p.sri_dims();
    Vector g(x.size());
    Vector probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = objective_value(p, unflatten(probe, out, p.rank()));
        probe[i] = x[i] - h;
        const double fm = objective_value(p, unflatten(probe, out, p.rank()));
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

struct GradcheckReport {
    double fd_vs_matrix = 0.0;
    double fd_vs_vector = 0.0;
    double matrix_vs_vector = 0.0;
    std::array<double, 3> fd_vs_matrix_block{};  // A, B, C
};

/// `perturb` is added to the first component of the matrix-form gradient
/// (negative control).
inline GradcheckReport gradcheck(const FusionProblem& p, const TripleFactors& f, double h, double perturb = 0.0) {
    Vector gm = flatten(gradient(p, f));
    gm[0] += perturb;
    const Vector gv = flatten(gradient_vectorized(p, f));
    const Vector fd = finite_difference_gradient(p, f, h);
    GradcheckReport rep{max_relative_error(gm, fd), max_relative_error(gv, fd), max_relative_error(gm, gv), {}};
    const Index sizes[3] = {f.a().size(), f.b().size(), f.c().size()};
    Index start = 0;
    for (int b = 0; b < 3; ++b) {
        rep.fd_vs_matrix_block[b] = max_relative_error(gm.segment(start, sizes[b]), fd.segment(start, sizes[b]));
        start += sizes[b];
    }
    return rep;
}

}  // namespace ttdsr
