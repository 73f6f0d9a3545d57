#pragma once

// Limited-memory BFGS with Barzilai-Borwein initial scaling, curvature
// skipping and Armijo backtracking. `lbfgs_minimize` is generic over the
// objective; `ttdsr_solve` applies it to the triple-decomposition fusion model.

#include "ttdsr/io.hpp"
#include "ttdsr/objective.hpp"
#include "ttdsr/triple.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ttdsr {

enum class BbVariant { bb1, bb2 };

struct SolverConfig {
    Index memory = 5;
    double armijo_sigma = 0.01;
    double backtrack_beta = 0.5;
    double mu = 1.0;
    double curvature_eps = 1e-10;
    Index max_iter = 400;
    double tol_grad_inf = 1e-10;
    double tol_x_inf = 1e-16;
    double tol_f_abs = 1e-2;
    BbVariant bb_variant = BbVariant::bb1;
    Index max_backtracks = 60;
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("SolverConfig: " + what); };
        if (memory < 1) fail("memory must be >= 1");
        if (!(armijo_sigma > 0 && armijo_sigma < 1)) fail("armijo_sigma must lie in (0,1)");
        if (!(backtrack_beta > 0 && backtrack_beta < 1)) fail("backtrack_beta must lie in (0,1)");
        if (!(mu >= 0)) fail("mu must be >= 0");
        if (!(curvature_eps > 0 && curvature_eps < 1)) fail("curvature_eps must lie in (0,1)");
        if (max_iter < 0) fail("max_iter must be >= 0");
        if (!(tol_grad_inf >= 0) || !(tol_x_inf >= 0) || !(tol_f_abs >= 0)) fail("tolerances must be >= 0");
        if (max_backtracks < 0) fail("max_backtracks must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Curvature history and search direction

struct CurvaturePair {
    Vector s;
    Vector y;
    double rho = 0.0;  // 1 / y's, or 0 when the pair was skipped

    bool skipped() const noexcept { return rho == 0.0; }
};

/// Ring buffer of the last `capacity` pairs, oldest first. Pairs with
/// y's < eps are kept with rho = 0 and contribute nothing.
class LbfgsHistory {
public:
    explicit LbfgsHistory(Index capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("LbfgsHistory: capacity must be >= 1");
    }

    /// Returns whether the pair was accepted.
    bool push(Vector s, Vector y, double eps) {
        const double ys = y.dot(s);
        const double rho = ys >= eps ? 1.0 / ys : 0.0;
        if (static_cast<Index>(pairs_.size()) == capacity_) pairs_.pop_front();
        pairs_.push_back({std::move(s), std::move(y), rho});
        return rho != 0.0;
    }

    const CurvaturePair* latest_accepted() const noexcept {
        for (auto it = pairs_.rbegin(); it != pairs_.rend(); ++it) {
            if (!it->skipped()) return &*it;
        }
        return nullptr;
    }

    void clear() noexcept { pairs_.clear(); }
    Index size() const noexcept { return static_cast<Index>(pairs_.size()); }
    Index capacity() const noexcept { return capacity_; }
    const std::deque<CurvaturePair>& pairs() const noexcept { return pairs_; }

private:
    Index capacity_;
    std::deque<CurvaturePair> pairs_;
};

/// p = -H g, with H the L-BFGS inverse-Hessian approximation seeded by gamma*I.
inline Vector two_loop_direction(const LbfgsHistory& hist, const Vector& g, double gamma) {
    if (!(gamma > 0)) throw std::invalid_argument("two_loop_direction: gamma must be positive");
    const auto& pairs = hist.pairs();
    std::vector<double> alpha(pairs.size(), 0.0);
    Vector q = -g;
    for (std::size_t i = pairs.size(); i-- > 0;) {
        const CurvaturePair& cp = pairs[i];
        if (cp.skipped()) continue;
        alpha[i] = cp.rho * cp.s.dot(q);
        q.noalias() -= alpha[i] * cp.y;
    }
    Vector p = gamma * q;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const CurvaturePair& cp = pairs[i];
        if (cp.skipped()) continue;
        const double beta = cp.rho * cp.y.dot(p);
        p.noalias() += (alpha[i] - beta) * cp.s;
    }
    return p;
}

/// BB1 = y's / y'y, BB2 = s's / y's; 1 when y's < eps.
inline double bb_scaling(const Vector& s, const Vector& y, BbVariant variant, double eps) {
    const double ys = y.dot(s);
    if (ys < eps) return 1.0;
    return variant == BbVariant::bb1 ? ys / y.squaredNorm() : s.squaredNorm() / ys;
}

// ---------------------------------------------------------------------------
// Line search

struct LineSearchResult {
    bool accepted = false;
    double alpha = 0.0;
    double f_new = 0.0;
    Index backtracks = 0;  // omega
    Vector x_new;
};

/// Smallest omega >= 0 with f(x + beta^omega p) <= f(x) + sigma beta^omega p'g.
/// `accepted` is false when max_backtracks reductions did not suffice.
template <class Fn>
LineSearchResult armijo_backtrack(Fn&& f, const Vector& x, const Vector& p, const Vector& g, double f_x,
                                  double sigma, double beta, Index max_backtracks) {
    const double slope = p.dot(g);
    if (!(slope < 0)) {
        throw std::invalid_argument("armijo_backtrack: p is not a descent direction (p'g = " + std::to_string(slope) +
                                    ")");
    }
    LineSearchResult res;
    double alpha = 1.0;
    for (Index omega = 0; omega <= max_backtracks; ++omega) {
        Vector trial = x + alpha * p;
        const double ft = f(trial);
        if (ft <= f_x + sigma * alpha * slope) {
            res.accepted = true;
            res.alpha = alpha;
            res.f_new = ft;
            res.backtracks = omega;
            res.x_new = std::move(trial);
            return res;
        }
        alpha *= beta;
    }
    res.backtracks = max_backtracks;
    return res;
}

// ---------------------------------------------------------------------------
// Driver

enum class Termination {
    gradient_tolerance,
    step_tolerance,
    max_iterations,
    line_search_failure,
    numerical_breakdown,
};

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::gradient_tolerance: return "gradient-tolerance";
        case Termination::step_tolerance: return "step-tolerance";
        case Termination::max_iterations: return "max-iterations";
        case Termination::line_search_failure: return "line-search-failure";
        case Termination::numerical_breakdown: return "numerical-breakdown";
    }
    return "unknown";
}

/// One row per visited iterate x_k. The step fields describe the move out of
/// x_k and are zero on the final row (`stepped == false`).
struct IterationRecord {
    Index iter = 0;
    double f = 0.0;
    double gnorm_inf = 0.0;
    double gnorm_2 = 0.0;
    double alpha = 0.0;
    Index backtracks = 0;
    double ptg = 0.0;
    double gamma = 0.0;
    double ms = 0.0;  // wall time since start, milliseconds
    bool stepped = false;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    Termination reason = Termination::max_iterations;
    Index breakdown_iter = -1;

    Index iterations() const noexcept { return records.empty() ? 0 : records.back().iter; }
    double final_f() const { return records.back().f; }
    double final_gnorm_inf() const { return records.back().gnorm_inf; }
};

inline constexpr std::string_view trace_csv_header = "iter,f,gnorm_inf,gnorm_2,alpha,backtracks,ptg,gamma,ms";

inline void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
    os << trace_csv_header << '\n';
    for (const IterationRecord& r : trace.records) {
        os << r.iter << ',' << format_double(r.f) << ',' << format_double(r.gnorm_inf) << ','
           << format_double(r.gnorm_2) << ',' << format_double(r.alpha) << ',' << r.backtracks << ','
           << format_double(r.ptg) << ',' << format_double(r.gamma) << ',' << format_double(r.ms) << '\n';
    }
    os << "# reason=" << to_string(trace.reason) << '\n';
}

struct MinimizeResult {
    Vector x;
    IterationTrace trace;
};

using TraceCallback = std::function<void(const IterationRecord&)>;

/// Minimizes a smooth function given `value(x) -> double` and
/// `value_grad(x) -> std::pair<double, Vector>`.
///
/// Stops when ||g||_inf < tol_grad_inf, or when ||x_{k+1} - x_k||_inf <
/// tol_x_inf and |f_{k+1} - f_k| < tol_f_abs, or after max_iter steps.
template <class ValueFn, class ValueGradFn>
MinimizeResult lbfgs_minimize(ValueFn&& value, ValueGradFn&& value_grad, Vector x0, const SolverConfig& cfg,
                              const TraceCallback& on_record = {}) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(clock::now() - start).count(); };

    MinimizeResult out;
    out.x = std::move(x0);
    IterationTrace& trace = out.trace;
    LbfgsHistory hist(cfg.memory);

    auto [f, g] = value_grad(out.x);
    double gamma = 1.0;

    auto finite = [](double fv, const Vector& gv) { return std::isfinite(fv) && gv.allFinite(); };
    auto emit = [&](IterationRecord rec) {
        rec.ms = elapsed_ms();
        trace.records.push_back(rec);
        if (on_record) on_record(trace.records.back());
    };

    for (Index k = 0;; ++k) {
        IterationRecord rec;
        rec.iter = k;
        rec.f = f;
        rec.gnorm_inf = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
        rec.gnorm_2 = g.norm();

        if (!finite(f, g)) {
            trace.reason = Termination::numerical_breakdown;
            trace.breakdown_iter = k;
            emit(rec);
            spdlog::error("non-finite objective or gradient at iteration {}", k);
            break;
        }
        if (rec.gnorm_inf < cfg.tol_grad_inf) {
            trace.reason = Termination::gradient_tolerance;
            emit(rec);
            break;
        }
        if (k >= cfg.max_iter) {
            trace.reason = Termination::max_iterations;
            emit(rec);
            break;
        }

        Vector p = two_loop_direction(hist, g, gamma);
        double ptg = p.dot(g);
        if (!(ptg < 0)) {
            // Only reachable through rounding; restart from the scaled gradient.
            spdlog::debug("iteration {}: p'g = {} not negative, clearing history", k, ptg);
            hist.clear();
            gamma = 1.0;
            p = -g;
            ptg = p.dot(g);
        }

        LineSearchResult ls = armijo_backtrack(value, out.x, p, g, f, cfg.armijo_sigma, cfg.backtrack_beta,
                                               cfg.max_backtracks);
        rec.ptg = ptg;
        rec.gamma = gamma;
        if (!ls.accepted) {
            trace.reason = Termination::line_search_failure;
            rec.backtracks = ls.backtracks;
            emit(rec);
            spdlog::warn("line search failed at iteration {} after {} backtracks", k, ls.backtracks);
            break;
        }
        rec.alpha = ls.alpha;
        rec.backtracks = ls.backtracks;
        rec.stepped = true;
        emit(rec);
        spdlog::debug("iter {:4d}  f = {:.6e}  |g|inf = {:.3e}  alpha = {:.3e}", k, f, rec.gnorm_inf, ls.alpha);

        auto [f_next, g_next] = value_grad(ls.x_new);
        Vector s = ls.x_new - out.x;
        Vector y = g_next - g;
        const double step_inf = s.size() ? s.cwiseAbs().maxCoeff() : 0.0;
        const double df = std::abs(f_next - f);

        if (hist.push(s, y, cfg.curvature_eps)) {
            const CurvaturePair* latest = hist.latest_accepted();
            gamma = bb_scaling(latest->s, latest->y, cfg.bb_variant, cfg.curvature_eps);
        }

        out.x = std::move(ls.x_new);
        f = f_next;
        g = std::move(g_next);

        if (step_inf < cfg.tol_x_inf && df < cfg.tol_f_abs && finite(f, g)) {
            IterationRecord last;
            last.iter = k + 1;
            last.f = f;
            last.gnorm_inf = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
            last.gnorm_2 = g.norm();
            trace.reason = Termination::step_tolerance;
            emit(last);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fusion problem

/// x = (vec A; vec B; vec C), each block in tensor layout order.
inline Vector flatten(const TripleFactors& f) {
    Vector x(f.parameter_count());
    x << vectorize(f.a()), vectorize(f.b()), vectorize(f.c());
    return x;
}

inline Vector flatten(const FactorGradient& g) {
    Vector x(g.da.size() + g.db.size() + g.dc.size());
    x << vectorize(g.da), vectorize(g.db), vectorize(g.dc);
    return x;
}

inline TripleFactors unflatten(const Vector& x, const Dims& out, Index r) {
    const Dims ad = a_dims(out, r), bd = b_dims(out, r), cd = c_dims(out, r);
    const Index na = ad[0] * ad[1] * ad[2], nb = bd[0] * bd[1] * bd[2], nc = cd[0] * cd[1] * cd[2];
    if (x.size() != na + nb + nc) {
        throw std::invalid_argument("unflatten: vector length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(na + nb + nc));
    }
    auto block = [&](Index start, Index n, const Dims& d) {
        return Tensor3(d, std::vector<double>(x.data() + start, x.data() + start + n));
    };
    return {block(0, na, ad), block(na, nb, bd), block(na + nb, nc, cd)};
}

/// Initial factors with i.i.d. N(0, 1/r) entries, so that the initial
/// reconstruction has O(1) entries.
inline TripleFactors default_initial_factors(const Dims& out, Index r, std::uint64_t seed) {
    return random_factors(out, r, seed, 1.0 / std::sqrt(static_cast<double>(r)));
}

struct SolveResult {
    TripleFactors factors;
    IterationTrace trace;
};

/// Fits triple factors to (Yh, Ym). Uses `init` when given, otherwise
/// default_initial_factors(..., cfg.seed).
inline SolveResult ttdsr_solve(const FusionProblem& problem, const SolverConfig& cfg,
                               std::optional<TripleFactors> init = std::nullopt,
                               const TraceCallback& on_record = {}) {
    const Dims out = problem.sri_dims();
    const Index r = problem.rank();
    TripleFactors x0 = init ? std::move(*init) : default_initial_factors(out, r, cfg.seed);
    problem.check_factors(x0);

    auto value = [&](const Vector& x) { return objective_value(problem, unflatten(x, out, r)); };
    auto value_grad = [&](const Vector& x) {
        ValueAndGradient vg = value_and_gradient(problem, unflatten(x, out, r));
        return std::pair<double, Vector>{vg.value, flatten(vg.grad)};
    };
    MinimizeResult res = lbfgs_minimize(value, value_grad, flatten(x0), cfg, on_record);
    return {unflatten(res.x, out, r), std::move(res.trace)};
}

// ---------------------------------------------------------------------------
// Config text

inline std::string to_string(BbVariant v) { return v == BbVariant::bb1 ? "BB1" : "BB2"; }

/// Applies recognized keys; unknown keys are errors.
inline void apply_solver_keys(SolverConfig& cfg, const KeyValues& kv, bool allow_unknown = false) {
    for (const auto& [key, value] : kv) {
        if (key == "memory") cfg.memory = parse_integer(key, value);
        else if (key == "armijo_sigma") cfg.armijo_sigma = parse_double(key, value);
        else if (key == "backtrack_beta") cfg.backtrack_beta = parse_double(key, value);
        else if (key == "mu") cfg.mu = parse_double(key, value);
        else if (key == "curvature_eps") cfg.curvature_eps = parse_double(key, value);
        else if (key == "max_iter") cfg.max_iter = parse_integer(key, value);
        else if (key == "tol_grad_inf") cfg.tol_grad_inf = parse_double(key, value);
        else if (key == "tol_x_inf") cfg.tol_x_inf = parse_double(key, value);
        else if (key == "tol_f_abs") cfg.tol_f_abs = parse_double(key, value);
        else if (key == "max_backtracks") cfg.max_backtracks = parse_integer(key, value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
        else if (key == "bb_variant") {
            if (value == "BB1" || value == "bb1") cfg.bb_variant = BbVariant::bb1;
            else if (value == "BB2" || value == "bb2") cfg.bb_variant = BbVariant::bb2;
            else throw FormatError("key 'bb_variant': expected BB1 or BB2, got '" + value + "'");
        } else if (!allow_unknown) {
            throw FormatError("unknown solver config key '" + key + "'");
        }
    }
    cfg.validate();
}

inline void write_solver_config(std::ostream& os, const SolverConfig& cfg) {
    os << "memory=" << cfg.memory << '\n'
       << "armijo_sigma=" << format_double(cfg.armijo_sigma) << '\n'
       << "backtrack_beta=" << format_double(cfg.backtrack_beta) << '\n'
       << "mu=" << format_double(cfg.mu) << '\n'
       << "curvature_eps=" << format_double(cfg.curvature_eps) << '\n'
       << "max_iter=" << cfg.max_iter << '\n'
       << "tol_grad_inf=" << format_double(cfg.tol_grad_inf) << '\n'
       << "tol_x_inf=" << format_double(cfg.tol_x_inf) << '\n'
       << "tol_f_abs=" << format_double(cfg.tol_f_abs) << '\n'
       << "bb_variant=" << to_string(cfg.bb_variant) << '\n'
       << "max_backtracks=" << cfg.max_backtracks << '\n'
       << "seed=" << cfg.seed << '\n';
}

}  // namespace ttdsr
