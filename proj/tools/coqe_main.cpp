// coqe: solver CLI for the cohomogeneity-one quasi-Einstein system.
//
// Subcommands: run-ivp, solve-bvp, solve-limit, scan-nonuniqueness,
// analyze-blowup, rescale, check-circle, estimate-bounds, presets.
// Exit codes: 0 solved / verdict produced, 1 bad input, 2 continuation
// stalled, 3 diverged.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "coqe/coqe.hpp"

namespace {

coqe::ConfigFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw coqe::config_error("cannot open config file: " + path);
    return coqe::parse_config(in);
}

coqe::ConfigBlock* find_or_add(coqe::ConfigFile& cfg, const std::string& name) {
    for (auto& b : cfg.blocks)
        if (b.name == name) return &b;
    cfg.blocks.push_back({name, {}});
    return &cfg.blocks.back();
}

void set_key(coqe::ConfigFile& cfg, const std::string& block, const std::string& key,
             const std::string& value) {
    coqe::ConfigBlock* b = find_or_add(cfg, block);
    for (auto& [k, v] : b->entries)
        if (k == key) {
            v = value;
            return;
        }
    b->entries.emplace_back(key, value);
}

std::string num(double v) { return coqe::csv_num(v); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cohomogeneity-one quasi-Einstein solver"};
    app.require_subcommand(1);
    app.fallthrough(); // let global flags appear after the subcommand

    std::string config_path;
    std::string outdir = "coqe-out";
    unsigned threads = 0;
    std::uint64_t seed = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "config file path")->envname("COQE_CONFIG");
    app.add_option("--out", outdir, "output directory for the experiment bundle");
    app.add_option("--threads", threads, "worker threads for scans (0 = all cores)")
        ->envname("COQE_THREADS");
    app.add_option("--seed", seed, "seed for sampling operations");
    app.add_flag("--verbose", verbose, "echo the summary to stderr");

    // every solver subcommand also accepts the config as a positional argument
    std::string positional_config;
    auto add_positional = [&positional_config](CLI::App* sc) {
        sc->add_option("config", positional_config, "config file path");
        return sc;
    };

    auto* sc_ivp = add_positional(app.add_subcommand("run-ivp", "integrate an initial-value problem"));
    auto* sc_bvp =
        add_positional(app.add_subcommand("solve-bvp", "solve the Dirichlet problem by continuation"));
    auto* sc_limit = add_positional(app.add_subcommand("solve-limit", "solve the h^2=0 limit system"));
    auto* sc_scan = add_positional(
        app.add_subcommand("scan-nonuniqueness", "symmetric-shoot scan on the 2-sphere"));
    double k1_min = 0.0, k1_max = 0.0;
    int scan_steps = 0;
    sc_scan->add_option("--k1-min", k1_min, "lower end of the k1 grid");
    sc_scan->add_option("--k1-max", k1_max, "upper end of the k1 grid");
    sc_scan->add_option("--steps", scan_steps, "grid size");
    auto* sc_blow =
        add_positional(app.add_subcommand("analyze-blowup", "integrate to blow-up and fit the rate"));
    std::string direction;
    std::string seed_state;
    sc_blow->add_option("--direction", direction, "backward or forward");
    sc_blow->add_option("--seed-state", seed_state,
                        "inline seed 't0; y...; L...; xi' overriding the [blowup] block");
    auto* sc_resc =
        add_positional(app.add_subcommand("rescale", "resample a trajectory in blow-up variables"));
    double anchor = 0.0, window = 0.0;
    bool have_anchor = false, have_window = false;
    sc_resc->add_option("--anchor", anchor, "anchor time")->each([&](const std::string&) {
        have_anchor = true;
    });
    sc_resc->add_option("--window", window, "rescaled half-window")->each([&](const std::string&) {
        have_window = true;
    });
    auto* sc_circle = add_positional(app.add_subcommand("check-circle", "circle solvability verdict"));
    double lambda = 0.0;
    bool have_lambda = false;
    sc_circle->add_option("--lambda", lambda, "quasi-Einstein constant")
        ->each([&](const std::string&) { have_lambda = true; });
    auto* sc_bounds =
        add_positional(app.add_subcommand("estimate-bounds", "sampled curvature ratio bounds"));
    long bounds_samples = 0;
    double box_radius = 0.0;
    sc_bounds->add_option("--samples", bounds_samples, "number of sample points");
    sc_bounds->add_option("--box-radius", box_radius, "sampling box half-width");
    auto* sc_presets = app.add_subcommand("presets", "list the shipped homogeneous-space presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_presets->parsed()) {
            std::cout << coqe::preset_catalog_text();
            return 0;
        }

        coqe::ConfigFile cfg;
        if (!positional_config.empty()) config_path = positional_config;
        if (!config_path.empty()) cfg = load_config(config_path);

        std::string mode;
        if (sc_ivp->parsed()) mode = "run-ivp";
        if (sc_bvp->parsed()) mode = "solve-bvp";
        if (sc_limit->parsed()) mode = "solve-limit";
        if (sc_scan->parsed()) {
            mode = "scan-nonuniqueness";
            if (sc_scan->count("--k1-min")) set_key(cfg, "scan", "k1_min", num(k1_min));
            if (sc_scan->count("--k1-max")) set_key(cfg, "scan", "k1_max", num(k1_max));
            if (sc_scan->count("--steps")) set_key(cfg, "scan", "steps", std::to_string(scan_steps));
        }
        if (sc_blow->parsed()) {
            mode = "analyze-blowup";
            if (!direction.empty()) set_key(cfg, "blowup", "direction", direction);
            if (!seed_state.empty()) {
                // 't0; yInline...; L...; xi' with ';' separating the four groups
                std::istringstream in(seed_state);
                std::string part;
                const char* keys[4] = {"t0", "y", "L", "xi"};
                int idx = 0;
                while (std::getline(in, part, ';') && idx < 4) set_key(cfg, "blowup", keys[idx++], part);
            }
        }
        if (sc_resc->parsed()) {
            mode = "rescale";
            if (have_anchor) set_key(cfg, "rescale", "anchor", num(anchor));
            if (have_window) set_key(cfg, "rescale", "window", num(window));
        }
        if (sc_circle->parsed()) {
            mode = "check-circle";
            if (have_lambda) set_key(cfg, "circle", "lambda", num(lambda));
        }
        if (sc_bounds->parsed()) {
            mode = "estimate-bounds";
            if (sc_bounds->count("--samples"))
                set_key(cfg, "bounds", "samples", std::to_string(bounds_samples));
            if (sc_bounds->count("--box-radius")) set_key(cfg, "bounds", "box_radius", num(box_radius));
        }

        const coqe::ExperimentBundle bundle =
            coqe::run_experiment(mode, cfg, outdir, threads, seed, verbose);
        for (const auto& [k, v] : bundle.results) std::cout << k << " = " << v << "\n";
        std::cout << "bundle: " << bundle.outdir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "coqe-error: " << e.what() << "\n";
        return coqe::exit_code_for_current_exception();
    }
}
