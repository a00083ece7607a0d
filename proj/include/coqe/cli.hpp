#pragma once

// Experiment driver behind the command-line tool: dispatches a parsed config to
// the solvers and writes a reproducible bundle (config snapshot, CSVs, summary)
// into the output directory. Re-running a snapshot reproduces every CSV
// bit-identically; wall-clock statistics live only in the summary.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "coqe/bvp.hpp"
#include "coqe/config.hpp"
#include "coqe/csv.hpp"
#include "coqe/dynamics.hpp"
#include "coqe/singularity.hpp"

namespace coqe {

inline constexpr const char* kToolVersion = "coqe 0.1.0";

struct PresetInfo {
    HomSpaceSpec space;
    bool dimension_hypothesis = false;  // all d_i >= 2
    bool degenerate = false;            // R vanishes identically
};

inline std::vector<PresetInfo> list_presets() {
    std::vector<PresetInfo> out;
    for (const HomSpaceSpec& s :
         {preset_circle(), preset_sphere2(), preset_torus(2), preset_torus(3)}) {
        PresetInfo info;
        info.space = s;
        info.dimension_hypothesis = s.dimension_hypothesis();
        info.degenerate = s.degenerate();
        out.push_back(std::move(info));
    }
    return out;
}

inline std::string preset_catalog_text() {
    std::ostringstream os;
    for (const auto& p : list_presets()) {
        os << p.space.label << ": n=" << p.space.n << " d=[";
        for (int i = 0; i < p.space.n; ++i)
            os << (i ? " " : "") << p.space.d[static_cast<std::size_t>(i)];
        os << "] beta=[";
        for (int i = 0; i < p.space.n; ++i)
            os << (i ? " " : "") << p.space.beta[static_cast<std::size_t>(i)];
        os << "] gamma=0";
        os << " | monotypic: asserted";
        os << " | dimension hypothesis (all d_i >= 2): "
           << (p.dimension_hypothesis ? "satisfied" : "violated");
        if (p.degenerate) os << " | degenerate (R == 0)";
        os << "\n";
    }
    os << "torus(d) is available for any d >= 1.\n";
    return os.str();
}

struct ExperimentBundle {
    std::string outdir;
    std::vector<std::string> csv_files;
    std::string snapshot_path;
    std::string summary_path;
    std::vector<std::pair<std::string, std::string>> results;

    const std::string* result(const std::string& key) const {
        for (const auto& [k, v] : results)
            if (k == key) return &v;
        return nullptr;
    }
};

namespace detail {

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot open output file: " + path);
    os << text;
}

inline std::string csv_path(ExperimentBundle& bundle, const std::string& name) {
    const std::string path = bundle.outdir + "/" + name;
    bundle.csv_files.push_back(path);
    return path;
}

template <class Fn>
void write_stream(const std::string& path, Fn&& fn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot open output file: " + path);
    fn(os);
}

} // namespace detail

// Runs one experiment. `mode` is the CLI subcommand name; the config must carry
// the matching mode block. Throws config_error / parameter_error on bad input
// and lets solver errors propagate for exit-code mapping by the caller.
inline ExperimentBundle run_experiment(const std::string& mode, const ConfigFile& cfg,
                                       const std::string& outdir, unsigned threads = 0,
                                       std::uint64_t seed = 0, bool verbose = false) {
    const auto t_start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(outdir);

    ExperimentBundle bundle;
    bundle.outdir = outdir;
    bundle.snapshot_path = outdir + "/config.cfg";
    detail::write_file(bundle.snapshot_path, serialize_config(cfg));

    auto push = [&bundle](const std::string& k, double v) {
        bundle.results.emplace_back(k, csv_num(v));
    };
    auto push_s = [&bundle](const std::string& k, const std::string& v) {
        bundle.results.emplace_back(k, v);
    };

    const std::string mode_block = config_mode_block(cfg);
    auto expect_block = [&](const char* want) {
        if (mode_block != want)
            throw config_error("config: subcommand '" + mode + "' needs block [" + want +
                               "], found [" + mode_block + "]");
    };

    HomSpaceSpec space;
    bool have_space = false;
    if (cfg.has("space")) {
        space = parse_space(cfg.require("space"));
        have_space = true;
        const double defect = gamma_symmetry_defect(space);
        if (defect > 0.0)
            std::cerr << "warning: gamma is asymmetric in its lower index pair (max defect "
                      << defect << "); verify the structure-constant convention\n";
    }
    auto need_space = [&] {
        if (!have_space)
            throw config_error("config: subcommand '" + mode + "' needs a [space] block");
    };
    SystemParams params;
    if (cfg.has("params")) params = parse_params(cfg.require("params"));
    IntegratorOptions iopts;
    if (cfg.has("solver")) iopts = parse_integrator_options(cfg.require("solver"));

    long accepted = 0, rejected = 0;

    if (mode == "run-ivp") {
        expect_block("ivp");
        need_space();
        const ConfigBlock& blk = cfg.require("ivp");
        PhaseState seed_state = parse_seed_state(blk, space.n, "[ivp]");
        const double t_end = detail::parse_double(
            blk.has("t_end") ? *blk.find("t_end") : "1", "[ivp] t_end");
        Trajectory traj = integrate(space, params, seed_state, t_end, iopts);
        if (blk.has("u0"))
            traj.u = reconstruct_u(traj, detail::parse_double(*blk.find("u0"), "[ivp] u0"));
        accepted = traj.accepted_steps;
        rejected = traj.rejected_steps;
        detail::write_stream(detail::csv_path(bundle, "trajectory.csv"),
                             [&](std::ostream& os) { write_trajectory_csv(os, traj); });
        push_s("termination", to_string(traj.termination));
        push("t_final", traj.samples.back().t);
        push_s("samples", std::to_string(traj.samples.size()));
    } else if (mode == "solve-bvp" || mode == "solve-limit") {
        expect_block("dirichlet");
        need_space();
        BvpOptions bopts;
        if (cfg.has("solver")) bopts = parse_bvp_options(cfg.require("solver"));
        DirichletData data = parse_dirichlet(cfg.require("dirichlet"), space.n);
        BvpSolution sol;
        if (mode == "solve-bvp") {
            sol = solve_dirichlet(space, params, data, bopts);
        } else {
            const ConfigBlock& blk = cfg.require("dirichlet");
            const double p =
                blk.has("p") ? detail::parse_double(*blk.find("p"), "[dirichlet] p") : 1.0;
            sol = solve_limit_system(space.d, params.m, data, p, bopts);
        }
        sol.trajectory.u = reconstruct_u(sol.trajectory, data.u0);
        accepted = sol.trajectory.accepted_steps;
        rejected = sol.trajectory.rejected_steps;
        detail::write_stream(detail::csv_path(bundle, "trajectory.csv"),
                             [&](std::ostream& os) { write_trajectory_csv(os, sol.trajectory); });
        push("boundary_error", sol.boundary_error);
        push("integral_error", sol.integral_error);
        push("h2_reached", sol.final_state.h2);
        push_s("newton_solves", std::to_string(sol.stats.solves));
        push_s("newton_total_iters", std::to_string(sol.stats.total_iters));
        push_s("continuation_steps", std::to_string(sol.stats.continuation_steps));
        push("final_residual_norm", sol.final_state.residual_norm);
    } else if (mode == "scan-nonuniqueness") {
        expect_block("scan");
        const ConfigBlock& blk = cfg.require("scan");
        const double k1_min = detail::parse_double(*blk.find("k1_min"), "[scan] k1_min");
        const double k1_max = detail::parse_double(*blk.find("k1_max"), "[scan] k1_max");
        const int steps =
            static_cast<int>(detail::parse_long(*blk.find("steps"), "[scan] steps"));
        ScanResult scan = nonuniqueness_scan(k1_min, k1_max, steps, iopts, threads);
        detail::write_stream(detail::csv_path(bundle, "scan.csv"),
                             [&](std::ostream& os) { write_scan_csv(os, scan.points); });
        push_s("folds", std::to_string(scan.folds.size()));
        for (std::size_t i = 0; i < scan.folds.size(); ++i) {
            push("fold_" + std::to_string(i + 1) + "_k1", scan.folds[i].k1);
            push("fold_" + std::to_string(i + 1) + "_y_end", scan.folds[i].y_end);
        }
        for (std::size_t i = 0; i < scan.pairs.size(); ++i) {
            push("pair_" + std::to_string(i + 1) + "_ybar", scan.pairs[i].ybar);
            push("pair_" + std::to_string(i + 1) + "_k1_a", scan.pairs[i].k1_a);
            push("pair_" + std::to_string(i + 1) + "_k1_b", scan.pairs[i].k1_b);
        }
    } else if (mode == "analyze-blowup") {
        expect_block("blowup");
        need_space();
        const ConfigBlock& blk = cfg.require("blowup");
        PhaseState seed_state = parse_seed_state(blk, space.n, "[blowup]");
        const std::string dir_s = blk.has("direction") ? *blk.find("direction") : "backward";
        const Direction dir =
            (dir_s == "forward") ? Direction::forward : Direction::backward;
        double t_stop = std::numeric_limits<double>::quiet_NaN();
        if (blk.has("t_stop")) t_stop = detail::parse_double(*blk.find("t_stop"), "t_stop");
        BlowupAnalysis an = analyze_blowup(space, params, seed_state, dir, iopts, t_stop);
        accepted = an.trajectory.accepted_steps;
        rejected = an.trajectory.rejected_steps;
        detail::write_stream(detail::csv_path(bundle, "trajectory.csv"), [&](std::ostream& os) {
            write_trajectory_csv(os, an.trajectory, true, an.report.t_sing);
        });
        push("t_sing", an.report.t_sing);
        push("sup_Mt", an.report.sup_Mt);
        push("exponent", an.report.exponent);
        push("fit_residual", an.report.fit_residual);
        push_s("fit_samples", std::to_string(an.report.fit_samples));
        for (const auto& d : an.report.diagnostics) push_s("diagnostic", d);
    } else if (mode == "rescale") {
        expect_block("ivp");
        need_space();
        const ConfigBlock& blk = cfg.require("ivp");
        const ConfigBlock& rs = cfg.require("rescale");
        PhaseState seed_state = parse_seed_state(blk, space.n, "[ivp]");
        const double t_end = detail::parse_double(
            blk.has("t_end") ? *blk.find("t_end") : "1", "[ivp] t_end");
        Trajectory traj = integrate(space, params, seed_state, t_end, iopts);
        accepted = traj.accepted_steps;
        rejected = traj.rejected_steps;
        const double anchor = detail::parse_double(*rs.find("anchor"), "[rescale] anchor");
        const double window = detail::parse_double(*rs.find("window"), "[rescale] window");
        RescaledTrajectory rt = rescale(space, traj, anchor, window);
        detail::write_stream(detail::csv_path(bundle, "rescaled.csv"),
                             [&](std::ostream& os) { write_rescaled_csv(os, rt, space.n); });
        push("M_anchor", rt.M_anchor);
        push("residual", rescaled_residual(space, params, rt));
        push_s("samples", std::to_string(rt.samples.size()));
    } else if (mode == "check-circle") {
        expect_block("circle");
        const ConfigBlock& blk = cfg.require("circle");
        const double lambda = detail::parse_double(*blk.find("lambda"), "[circle] lambda");
        CircleCheck chk = circle_nonexistence_check(lambda, iopts);
        push_s("verdict", chk.verdict == CircleVerdict::solvable ? "solvable" : "unsolvable");
        push("lambda", chk.lambda);
        push("max_continuous_span", chk.max_continuous_span);
        if (chk.verdict == CircleVerdict::solvable && chk.witness) {
            push("witness_L0", chk.witness_L0);
            Trajectory w = *chk.witness;
            w.u = reconstruct_u(w, 0.0);
            const QeResidual res = qe_residual(preset_circle(),
                                               SystemParams{0.0, lambda, 1.0}, w);
            push("witness_qe_residual", std::max(res.res_first, res.max_second()));
            detail::write_stream(detail::csv_path(bundle, "witness.csv"),
                                 [&](std::ostream& os) { write_trajectory_csv(os, w); });
        } else {
            push_s("phases_tested", std::to_string(chk.phases_tested));
            push_s("phases_blown_up", std::to_string(chk.phases_blown_up));
        }
    } else if (mode == "estimate-bounds") {
        expect_block("bounds");
        need_space();
        const ConfigBlock& blk = cfg.require("bounds");
        const long samples =
            blk.has("samples") ? detail::parse_long(*blk.find("samples"), "samples") : 100000;
        const double box =
            blk.has("box_radius") ? detail::parse_double(*blk.find("box_radius"), "box_radius")
                                  : 3.0;
        std::uint64_t s = seed;
        if (blk.has("seed"))
            s = static_cast<std::uint64_t>(detail::parse_long(*blk.find("seed"), "seed"));
        RicciBoundEstimates est = estimate_ricci_bounds(space, samples, box, s);
        push("c1", est.c1);
        push("c2", est.c2);
        push("c3", est.c3);
        push_s("samples", std::to_string(est.samples));
        push("box_radius", est.box_radius);
    } else {
        throw config_error("unknown mode: " + mode);
    }

    const auto t_end_clock = std::chrono::steady_clock::now();
    const double wall_ms =
        std::chrono::duration<double, std::milli>(t_end_clock - t_start).count();

    std::ostringstream sum;
    sum << kToolVersion << "\n";
    sum << "mode = " << mode << "\n";
    for (const auto& [k, v] : bundle.results) sum << k << " = " << v << "\n";
    sum << "accepted_steps = " << accepted << "\n";
    sum << "rejected_steps = " << rejected << "\n";
    sum << "wall_ms = " << wall_ms << "\n";
    bundle.summary_path = outdir + "/summary.txt";
    detail::write_file(bundle.summary_path, sum.str());

    if (verbose) std::cerr << sum.str();
    return bundle;
}

// Exit-code mapping shared by the CLI: 0 solved / verdict produced, 1 bad
// input, 2 continuation stalled, 3 diverged.
inline int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const continuation_stalled_error&) {
        return 2;
    } catch (const shot_diverged_error&) {
        return 3;
    } catch (const newton_diverged_error&) {
        return 3;
    } catch (const all_shots_diverged_error&) {
        return 3;
    } catch (const config_error&) {
        return 1;
    } catch (const parameter_error&) {
        return 1;
    } catch (const std::exception&) {
        return 1;
    }
}

} // namespace coqe
