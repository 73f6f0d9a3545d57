// ttdsr: command-line front end over TTD1 files.
//
// Exit codes: 0 ok, 1 check failed, 2 usage or invalid input, 3 solver
// breakdown.

#include "ttdsr/gradcheck.hpp"
#include "ttdsr/log.hpp"
#include "ttdsr/synthgen.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace ttdsr;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_usage = 2;
constexpr int exit_breakdown = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const char* flag) {
    if (!fs::is_regular_file(p)) throw UsageError(std::string(flag) + ": no such file: " + p.string());
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string dims;
    Index rank = 0;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

int run_synth(const SynthArgs& a) {
    const Dims dims = parse_dims(a.dims);
    if (a.rank < 1) throw UsageError("--rank must be >= 1");
    const GroundTruth gt = generate_ground_truth(dims, a.rank, a.seed);
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    write_tensor(out / "z.ttd", gt.z);
    write_factors(out, gt.truth);
    std::cout << "wrote " << (out / "z.ttd").string() << " dims=" << format_dims(dims) << " rank=" << a.rank << '\n';
    return exit_ok;
}

// --- degrade ---------------------------------------------------------------

struct DegradeArgs {
    std::string z;
    Index d = 4;
    Index q = 9;
    double sigma = 0.0;
    Index m3 = 0;
    double snr_h = std::numeric_limits<double>::infinity();
    double snr_m = std::numeric_limits<double>::infinity();
    std::uint64_t seed_h = 2;
    std::uint64_t seed_m = 3;
    std::string out_dir = ".";
};

int run_degrade(const DegradeArgs& a) {
    require_file(a.z, "--z");
    const Tensor3 z = read_tensor(a.z);
    const Dims& dims = z.dims();
    if (a.d < 1 || dims[0] % a.d != 0 || dims[1] % a.d != 0) {
        throw UsageError("--d " + std::to_string(a.d) + " must divide the spatial sizes of " + dims_string(dims));
    }
    if (a.m3 < 1 || a.m3 > dims[2]) throw UsageError("--m3 must lie in [1, " + std::to_string(dims[2]) + "]");
    const Operators ops = build_operators(dims, SpatialParams{a.d, a.q, a.sigma}, a.m3);
    const Tensor3 yh = add_white_gaussian_noise(degrade_spatial(z, ops.spatial), a.snr_h, a.seed_h);
    const Tensor3 ym = add_white_gaussian_noise(degrade_spectral(z, ops.spectral), a.snr_m, a.seed_m);
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    write_tensor(out / "yh.ttd", yh);
    write_tensor(out / "ym.ttd", ym);
    write_operators(out, ops);
    std::cout << "yh " << dims_string(yh.dims()) << "  ym " << dims_string(ym.dims()) << '\n';
    return exit_ok;
}

// --- fuse ------------------------------------------------------------------

struct FuseArgs {
    std::string yh;
    std::string ym;
    std::string ops_dir;
    Index rank = 0;
    std::string config;
    std::string init_dir;
    std::string out = ".";
};

int run_fuse(const FuseArgs& a) {
    require_file(a.yh, "--yh");
    require_file(a.ym, "--ym");
    if (a.rank < 1) throw UsageError("--rank must be >= 1");
    SolverConfig cfg;
    if (!a.config.empty()) {
        require_file(a.config, "--config");
        apply_solver_keys(cfg, read_key_values(a.config));
    }
    std::cout << "# solver configuration\n";
    write_solver_config(std::cout, cfg);

    const Operators ops = read_operators(a.ops_dir);
    const FusionProblem problem(read_tensor(a.yh), read_tensor(a.ym), ops.spatial.p1, ops.spatial.p2,
                                ops.spectral.p3, cfg.mu, a.rank);
    std::optional<TripleFactors> init;
    if (!a.init_dir.empty()) init = read_factors(a.init_dir);

    SolveResult res = ttdsr_solve(problem, cfg, std::move(init));
    const fs::path out(a.out);
    fs::create_directories(out);
    write_tensor(out / "zhat.ttd", reconstruct(res.factors));
    write_factors(out, res.factors);
    std::ofstream trace(out / "trace.csv");
    write_trace_csv(trace, res.trace);

    std::cout << "reason=" << to_string(res.trace.reason) << " iterations=" << res.trace.iterations()
              << " f=" << format_double(res.trace.final_f())
              << " gnorm_inf=" << format_double(res.trace.final_gnorm_inf()) << '\n';
    switch (res.trace.reason) {
        case Termination::numerical_breakdown:
            std::cerr << "numerical breakdown at iteration " << res.trace.breakdown_iter << '\n';
            return exit_breakdown;
        case Termination::line_search_failure:
            std::cerr << "line search failed; partial result written\n";
            return exit_breakdown;
        default:
            return exit_ok;
    }
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string z;
    std::string zhat;
    double d = 0.0;
    double time_s = 0.0;
    std::string out = "report.csv";
};

int run_eval(const EvalArgs& a) {
    require_file(a.z, "--z");
    require_file(a.zhat, "--zhat");
    if (!(a.d > 0)) throw UsageError("--d must be positive");
    const Tensor3 z = read_tensor(a.z);
    const Tensor3 zhat = read_tensor(a.zhat);
    if (z.dims() != zhat.dims()) {
        throw UsageError("dims differ: " + dims_string(z.dims()) + " vs " + dims_string(zhat.dims()));
    }
    const QualityReport rep = evaluate(z, zhat, a.d, a.time_s);
    write_report_csv(std::cout, rep);
    std::ofstream os(a.out);
    if (!os) throw std::runtime_error("cannot write " + a.out);
    write_report_csv(os, rep);
    return exit_ok;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
    std::string dims = "8,8,6";
    Index rank = 2;
    std::uint64_t seed = 1;
    double h = 1e-6;
    double mu = 1.0;
    double perturb = 0.0;
    double tol_fd = 1e-6;
    double tol_forms = 1e-10;
};

int run_gradcheck(const GradcheckArgs& a) {
    const Dims dims = parse_dims(a.dims);
    if (a.rank < 1) throw UsageError("--rank must be >= 1");
    if (!(a.h > 0)) throw UsageError("--h must be positive");
    const FusionProblem p = random_fusion_problem(dims, a.rank, a.mu, a.seed);
    const TripleFactors f = random_factors(dims, a.rank, a.seed + 1);
    const GradcheckReport rep = gradcheck(p, f, a.h, a.perturb);
    std::cout << "fd_vs_matrix=" << format_double(rep.fd_vs_matrix) << '\n'
              << "fd_vs_vector=" << format_double(rep.fd_vs_vector) << '\n'
              << "matrix_vs_vector=" << format_double(rep.matrix_vs_vector) << '\n'
              << "fd_vs_matrix_blocks=" << format_double(rep.fd_vs_matrix_block[0]) << ','
              << format_double(rep.fd_vs_matrix_block[1]) << ',' << format_double(rep.fd_vs_matrix_block[2]) << '\n';
    const bool ok = rep.fd_vs_matrix <= a.tol_fd && rep.fd_vs_vector <= a.tol_fd &&
                    rep.matrix_vs_vector <= a.tol_forms;
    std::cout << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? exit_ok : exit_check_failed;
}

// --- dump-slice ------------------------------------------------------------

struct DumpArgs {
    std::string tensor;
    Index band = 0;
    std::string out;
};

int run_dump(const DumpArgs& a) {
    require_file(a.tensor, "--tensor");
    const Tensor3 t = read_tensor(a.tensor);
    if (a.band < 0 || a.band >= t.dims()[2]) {
        throw UsageError("--band " + std::to_string(a.band) + " out of range [0, " + std::to_string(t.dims()[2]) + ")");
    }
    write_pgm_slice(a.out, t, a.band);
    return exit_ok;
}

// --- sweep / run -----------------------------------------------------------

struct SweepArgs {
    std::string spec;
    Index rank_min = 1;
    Index rank_max = 0;
    std::string out_dir = ".";
    unsigned jobs = 1;
};

int run_sweep(const SweepArgs& a) {
    require_file(a.spec, "--spec");
    const ExperimentSpec base = read_experiment_spec(a.spec);
    const Index rmax = a.rank_max > 0 ? a.rank_max : base.true_rank;
    if (a.rank_min < 1 || rmax < a.rank_min) throw UsageError("need 1 <= --rank-min <= --rank-max");
    const fs::path out(a.out_dir);
    fs::create_directories(out);

    const auto count = static_cast<std::size_t>(rmax - a.rank_min + 1);
    std::vector<std::optional<ExperimentResult>> results(count);
    std::vector<std::string> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            ExperimentSpec s = base;
            s.fit_rank = a.rank_min + static_cast<Index>(i);
            try {
                results[i] = run_experiment(s, out / ("rank_" + std::to_string(s.fit_rank)));
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(count)));
    std::vector<std::jthread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::ofstream csv(out / "sweep.csv");
    csv << "rank,rsnr_db,cc,sam_deg,ergas,time_s,iterations,reason\n";
    for (std::size_t i = 0; i < count; ++i) {
        if (!errors[i].empty()) throw std::runtime_error("rank " + std::to_string(a.rank_min + i) + ": " + errors[i]);
        const ExperimentResult& r = *results[i];
        const std::string row = std::to_string(a.rank_min + static_cast<Index>(i)) + "," +
                                format_double(r.report.r_snr_db) + "," + format_double(r.report.cc) + "," +
                                format_double(r.report.sam_deg) + "," + format_double(r.report.ergas) + "," +
                                format_double(r.report.wall_time_s) + "," + std::to_string(r.trace.iterations()) +
                                "," + to_string(r.trace.reason);
        csv << row << '\n';
        std::cout << row << '\n';
    }
    return exit_ok;
}

struct RunArgs {
    std::string spec;
    std::string out_dir = ".";
};

int run_run(const RunArgs& a) {
    require_file(a.spec, "--spec");
    const ExperimentResult r = run_experiment(read_experiment_spec(a.spec), fs::path(a.out_dir));
    write_report_csv(std::cout, r.report);
    std::cout << "# reason=" << to_string(r.trace.reason) << '\n';
    return r.trace.reason == Termination::numerical_breakdown ? exit_breakdown : exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging_from_env();

    CLI::App app{"Hyperspectral/multispectral fusion by low-rank triple decomposition"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a positive ground-truth tensor of known triple rank");
    c_synth->add_option("--dims", synth.dims, "m1,m2,n3")->required();
    c_synth->add_option("--rank", synth.rank, "triple rank")->required();
    c_synth->add_option("--seed", synth.seed, "generator seed");
    c_synth->add_option("--out-dir", synth.out_dir, "output directory");

    DegradeArgs degrade;
    auto* c_degrade = app.add_subcommand("degrade", "Produce Yh, Ym and the operators from a ground truth");
    c_degrade->add_option("--z", degrade.z, "ground truth (TTD1)")->required();
    c_degrade->add_option("--d", degrade.d, "spatial downsampling ratio");
    c_degrade->add_option("--q", degrade.q, "blur taps (odd)");
    c_degrade->add_option("--sigma", degrade.sigma, "blur std in pixels; 0 selects q/6");
    c_degrade->add_option("--m3", degrade.m3, "number of multispectral bands")->required();
    c_degrade->add_option("--snr-h", degrade.snr_h, "noise SNR of Yh in dB (inf = none)");
    c_degrade->add_option("--snr-m", degrade.snr_m, "noise SNR of Ym in dB (inf = none)");
    c_degrade->add_option("--seed-h", degrade.seed_h, "noise seed for Yh");
    c_degrade->add_option("--seed-m", degrade.seed_m, "noise seed for Ym");
    c_degrade->add_option("--out-dir", degrade.out_dir, "output directory");

    FuseArgs fuse;
    auto* c_fuse = app.add_subcommand("fuse", "Fit triple factors to (Yh, Ym) and write the fused image");
    c_fuse->add_option("--yh", fuse.yh, "hyperspectral image (TTD1)")->required();
    c_fuse->add_option("--ym", fuse.ym, "multispectral image (TTD1)")->required();
    c_fuse->add_option("--ops-dir", fuse.ops_dir, "directory with p1.ttd, p2.ttd, p3.ttd")->required();
    c_fuse->add_option("--rank", fuse.rank, "triple rank")->required();
    c_fuse->add_option("--config", fuse.config, "solver key=value file");
    c_fuse->add_option("--init-dir", fuse.init_dir, "start from factors in this directory");
    c_fuse->add_option("--out", fuse.out, "output directory");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Score a reconstruction: R-SNR, CC, SAM, ERGAS, time");
    c_eval->add_option("--z", eval.z, "reference (TTD1)")->required();
    c_eval->add_option("--zhat", eval.zhat, "estimate (TTD1)")->required();
    c_eval->add_option("--d", eval.d, "spatial ratio used by ERGAS")->required();
    c_eval->add_option("--time", eval.time_s, "wall time to report, seconds");
    c_eval->add_option("--out", eval.out, "report CSV path");

    GradcheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Compare analytic gradients against finite differences");
    c_gc->set_help_flag("--help", "Print this help message and exit");
    c_gc->add_option("--dims", gc.dims, "m1,m2,n3");
    c_gc->add_option("--rank", gc.rank, "triple rank");
    c_gc->add_option("--seed", gc.seed, "instance seed");
    c_gc->add_option("--h", gc.h, "finite-difference step");
    c_gc->add_option("--mu", gc.mu, "regularization weight");
    c_gc->add_option("--perturb", gc.perturb)->group("");

    DumpArgs dump;
    auto* c_dump = app.add_subcommand("dump-slice", "Write one band as an 8-bit PGM");
    c_dump->add_option("--tensor", dump.tensor, "tensor (TTD1)")->required();
    c_dump->add_option("--band", dump.band, "0-based band index")->required();
    c_dump->add_option("--out", dump.out, "PGM path")->required();

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("sweep", "Run an experiment spec over a range of fit ranks");
    c_sweep->add_option("--spec", sweep.spec, "experiment spec (key=value)")->required();
    c_sweep->add_option("--rank-min", sweep.rank_min, "smallest fit rank");
    c_sweep->add_option("--rank-max", sweep.rank_max, "largest fit rank (default: true_rank)");
    c_sweep->add_option("--out-dir", sweep.out_dir, "output directory");
    c_sweep->add_option("--jobs", sweep.jobs, "concurrent experiments");

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Run one experiment spec end to end");
    c_run->add_option("--spec", run.spec, "experiment spec (key=value)")->required();
    c_run->add_option("--out-dir", run.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_degrade) return run_degrade(degrade);
        if (*c_fuse) return run_fuse(fuse);
        if (*c_eval) return run_eval(eval);
        if (*c_gc) return run_gradcheck(gc);
        if (*c_dump) return run_dump(dump);
        if (*c_sweep) return run_sweep(sweep);
        if (*c_run) return run_run(run);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
