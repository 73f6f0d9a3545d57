#pragma once

// Synthetic experiments: ground truth of known triple rank, Wald-style
// degradation, noise, fit, and scoring. Also the on-disk layout shared with
// the CLI (operator and factor directories, spec files).

#include "ttdsr/degradation.hpp"
#include "ttdsr/io.hpp"
#include "ttdsr/lbfgs.hpp"
#include "ttdsr/metrics.hpp"
#include "ttdsr/objective.hpp"
#include "ttdsr/triple.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>

namespace ttdsr {

struct ExperimentSpec {
    Dims dims{16, 16, 12};
    Index true_rank = 2;
    Index fit_rank = 2;
    SpatialParams spatial{2, 3, 0.0};
    Index m3 = 4;
    double snr_h = std::numeric_limits<double>::infinity();
    double snr_m = std::numeric_limits<double>::infinity();
    std::uint64_t seed_gen = 1;
    std::uint64_t seed_noise_h = 2;
    std::uint64_t seed_noise_m = 3;
    std::uint64_t seed_init = 7;
    SolverConfig solver{};

    ExperimentSpec() { solver.mu = 1e-8; }

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("ExperimentSpec: " + what); };
        for (Index v : dims) {
            if (v <= 0) fail("dims must be positive");
        }
        if (true_rank < 1 || fit_rank < 1) fail("ranks must be >= 1");
        if (spatial.d < 1 || dims[0] % spatial.d != 0 || dims[1] % spatial.d != 0) {
            fail("d=" + std::to_string(spatial.d) + " must divide m1 and m2 of " + dims_string(dims));
        }
        if (spatial.q < 1 || spatial.q % 2 == 0) fail("q must be odd and positive");
        if (m3 < 1 || m3 > dims[2]) fail("m3 must lie in [1, n3]");
        if (std::isnan(snr_h) || std::isnan(snr_m)) fail("snr must not be NaN");
        solver.validate();
    }
};

/// Solver keys are accepted unprefixed next to the experiment keys; `seed_init`
/// sets the solver seed, `mu` the regularization weight.
inline ExperimentSpec parse_experiment_spec(const KeyValues& kv) {
    ExperimentSpec s;
    KeyValues solver_keys;
    bool fit_rank_given = false;
    for (const auto& [key, value] : kv) {
        if (key == "dims") s.dims = parse_dims(value);
        else if (key == "true_rank") s.true_rank = parse_integer(key, value);
        else if (key == "fit_rank") { s.fit_rank = parse_integer(key, value); fit_rank_given = true; }
        else if (key == "d") s.spatial.d = parse_integer(key, value);
        else if (key == "q") s.spatial.q = parse_integer(key, value);
        else if (key == "kernel_sigma") s.spatial.sigma = parse_double(key, value);
        else if (key == "m3") s.m3 = parse_integer(key, value);
        else if (key == "snr_h") s.snr_h = parse_double(key, value);
        else if (key == "snr_m") s.snr_m = parse_double(key, value);
        else if (key == "seed_gen") s.seed_gen = static_cast<std::uint64_t>(parse_integer(key, value));
        else if (key == "seed_noise_h") s.seed_noise_h = static_cast<std::uint64_t>(parse_integer(key, value));
        else if (key == "seed_noise_m") s.seed_noise_m = static_cast<std::uint64_t>(parse_integer(key, value));
        else if (key == "seed_init") s.seed_init = static_cast<std::uint64_t>(parse_integer(key, value));
        else if (key == "seed") throw FormatError("use seed_init, not seed, in an experiment spec");
        else solver_keys.emplace(key, value);
    }
    if (!fit_rank_given) s.fit_rank = s.true_rank;
    apply_solver_keys(s.solver, solver_keys);
    s.solver.seed = s.seed_init;
    s.validate();
    return s;
}

inline ExperimentSpec read_experiment_spec(const std::filesystem::path& path) {
    return parse_experiment_spec(read_key_values(path));
}

inline void write_experiment_spec(std::ostream& os, const ExperimentSpec& s) {
    os << "dims=" << format_dims(s.dims) << '\n'
       << "true_rank=" << s.true_rank << '\n'
       << "fit_rank=" << s.fit_rank << '\n'
       << "d=" << s.spatial.d << '\n'
       << "q=" << s.spatial.q << '\n'
       << "kernel_sigma=" << format_double(s.spatial.sigma) << '\n'
       << "m3=" << s.m3 << '\n'
       << "snr_h=" << format_double(s.snr_h) << '\n'
       << "snr_m=" << format_double(s.snr_m) << '\n'
       << "seed_gen=" << s.seed_gen << '\n'
       << "seed_noise_h=" << s.seed_noise_h << '\n'
       << "seed_noise_m=" << s.seed_noise_m << '\n'
       << "seed_init=" << s.seed_init << '\n';
    SolverConfig solver = s.solver;
    std::ostringstream tmp;
    write_solver_config(tmp, solver);
    // seed is already echoed as seed_init
    std::istringstream lines(tmp.str());
    for (std::string line; std::getline(lines, line);) {
        if (!line.starts_with("seed=")) os << line << '\n';
    }
}

// ---------------------------------------------------------------------------
// Ground truth

struct GroundTruth {
    Tensor3 z;
    TripleFactors truth;
};

/// Z = [[A, B, C]] with factor entries uniform on (0, 1], scaled through C so
/// that max(Z) = 1. Positive factors keep Z strictly positive without adding
/// a constant offset, which would raise the triple rank.
inline GroundTruth generate_ground_truth(const Dims& dims, Index rank, std::uint64_t seed) {
    if (rank < 1) throw std::invalid_argument("generate_ground_truth: rank must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const Dims& d) {
        Tensor3 t(d);
        for (double& v : t.data()) v = 1.0 - unit(rng);
        return t;
    };
    Tensor3 a = draw(a_dims(dims, rank));
    Tensor3 b = draw(b_dims(dims, rank));
    Tensor3 c = draw(c_dims(dims, rank));
    TripleFactors f(std::move(a), std::move(b), std::move(c));
    Tensor3 z = reconstruct(f);
    const double peak = *std::max_element(z.values().begin(), z.values().end());
    f.c() *= 1.0 / peak;
    z *= 1.0 / peak;
    return {std::move(z), std::move(f)};
}

// ---------------------------------------------------------------------------
// Operator and factor directories

struct Operators {
    SpatialOperator spatial;
    SpectralOperator spectral;
};

inline Operators build_operators(const Dims& dims, const SpatialParams& sp, Index m3) {
    return {build_spatial_operator(dims[0], dims[1], sp), build_spectral(dims[2], m3)};
}

/// p1.ttd, p2.ttd, p3.ttd and ops.txt (d, q, sigma, offset).
inline void write_operators(const std::filesystem::path& dir, const Operators& ops) {
    std::filesystem::create_directories(dir);
    write_matrix(dir / "p1.ttd", ops.spatial.p1);
    write_matrix(dir / "p2.ttd", ops.spatial.p2);
    write_matrix(dir / "p3.ttd", ops.spectral.p3);
    std::ofstream os(dir / "ops.txt");
    const SpatialParams& sp = ops.spatial.params;
    os << "d=" << sp.d << '\n'
       << "q=" << sp.q << '\n'
       << "sigma=" << format_double(sp.effective_sigma()) << '\n'
       << "offset=" << sp.offset() << '\n';
}

inline Operators read_operators(const std::filesystem::path& dir) {
    Operators ops;
    ops.spatial.p1 = read_matrix(dir / "p1.ttd");
    ops.spatial.p2 = read_matrix(dir / "p2.ttd");
    ops.spectral.p3 = read_matrix(dir / "p3.ttd");
    if (std::filesystem::exists(dir / "ops.txt")) {
        const KeyValues kv = read_key_values(dir / "ops.txt");
        if (auto it = kv.find("d"); it != kv.end()) ops.spatial.params.d = parse_integer("d", it->second);
        if (auto it = kv.find("q"); it != kv.end()) ops.spatial.params.q = parse_integer("q", it->second);
        if (auto it = kv.find("sigma"); it != kv.end()) ops.spatial.params.sigma = parse_double("sigma", it->second);
    }
    return ops;
}

/// a.ttd, b.ttd, c.ttd and factors.txt with the rank.
inline void write_factors(const std::filesystem::path& dir, const TripleFactors& f) {
    std::filesystem::create_directories(dir);
    write_tensor(dir / "a.ttd", f.a());
    write_tensor(dir / "b.ttd", f.b());
    write_tensor(dir / "c.ttd", f.c());
    std::ofstream(dir / "factors.txt") << "rank=" << f.rank() << '\n';
}

inline TripleFactors read_factors(const std::filesystem::path& dir) {
    return {read_tensor(dir / "a.ttd"), read_tensor(dir / "b.ttd"), read_tensor(dir / "c.ttd")};
}

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentResult {
    QualityReport report;
    IterationTrace trace;
    Tensor3 z;
    Tensor3 zhat;
    TripleFactors factors;
};

/// Runs the whole pipeline. When `out_dir` is given, writes z.ttd, yh.ttd,
/// ym.ttd, zhat.ttd, trace.csv, report.csv and spec.txt into it.
inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
    spec.validate();
    GroundTruth gt = generate_ground_truth(spec.dims, spec.true_rank, spec.seed_gen);
    const Operators ops = build_operators(spec.dims, spec.spatial, spec.m3);
    Tensor3 yh = add_white_gaussian_noise(degrade_spatial(gt.z, ops.spatial), spec.snr_h, spec.seed_noise_h);
    Tensor3 ym = add_white_gaussian_noise(degrade_spectral(gt.z, ops.spectral), spec.snr_m, spec.seed_noise_m);

    const FusionProblem problem(yh, ym, ops.spatial.p1, ops.spatial.p2, ops.spectral.p3, spec.solver.mu,
                                spec.fit_rank);
    SolverConfig cfg = spec.solver;
    cfg.seed = spec.seed_init;

    const auto start = std::chrono::steady_clock::now();
    SolveResult solved = ttdsr_solve(problem, cfg);
    Tensor3 zhat = reconstruct(solved.factors);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    QualityReport report = evaluate(gt.z, zhat, static_cast<double>(spec.spatial.d), seconds);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_tensor(*out_dir / "z.ttd", gt.z);
        write_tensor(*out_dir / "yh.ttd", yh);
        write_tensor(*out_dir / "ym.ttd", ym);
        write_tensor(*out_dir / "zhat.ttd", zhat);
        std::ofstream trace_os(*out_dir / "trace.csv");
        write_trace_csv(trace_os, solved.trace);
        std::ofstream report_os(*out_dir / "report.csv");
        write_report_csv(report_os, report);
        std::ofstream spec_os(*out_dir / "spec.txt");
        write_experiment_spec(spec_os, spec);
    }
    return {report, std::move(solved.trace), std::move(gt.z), std::move(zhat), std::move(solved.factors)};
}

}  // namespace ttdsr
