#pragma once

// Flat structured-text configuration: named [blocks] of key = value lines,
// '#' comments, arrays as whitespace/comma-separated numbers (brackets
// optional), gamma entries as zero-based (i, k, l, value) quadruples with one
// quadruple per repeated `gamma =` line.

#include <algorithm>
#include <cctype>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coqe/bvp.hpp"
#include "coqe/dynamics.hpp"
#include "coqe/errors.hpp"
#include "coqe/homspace.hpp"

namespace coqe {

struct ConfigBlock {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries; // duplicates allowed (gamma)

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
    std::vector<std::string> find_all(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries)
            if (k == key) out.push_back(v);
        return out;
    }
    bool has(const std::string& key) const { return find(key) != nullptr; }
};

struct ConfigFile {
    std::vector<ConfigBlock> blocks;

    const ConfigBlock* find(const std::string& name) const {
        for (const auto& b : blocks)
            if (b.name == name) return &b;
        return nullptr;
    }
    const ConfigBlock& require(const std::string& name) const {
        const ConfigBlock* b = find(name);
        if (!b) throw config_error("config: missing required block [" + name + "]");
        return *b;
    }
    bool has(const std::string& name) const { return find(name) != nullptr; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config: cannot parse number '" + s + "' in " + where);
    }
}

inline long parse_long(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config: cannot parse integer '" + s + "' in " + where);
    }
}

inline std::vector<std::string> split_list(const std::string& raw) {
    std::string s;
    for (char ch : raw)
        s += (ch == '[' || ch == ']' || ch == ',' || ch == '(' || ch == ')') ? ' ' : ch;
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::vector<double> parse_array(const std::string& raw, const std::string& where) {
    std::vector<double> out;
    for (const auto& tok : split_list(raw)) out.push_back(parse_double(tok, where));
    return out;
}

} // namespace detail

inline ConfigFile parse_config(std::istream& in) {
    ConfigFile cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("config line " + std::to_string(lineno) +
                                   ": malformed block header");
            cfg.blocks.push_back({detail::trim(line.substr(1, line.size() - 2)), {}});
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
        if (cfg.blocks.empty())
            throw config_error("config line " + std::to_string(lineno) +
                               ": key outside any [block]");
        cfg.blocks.back().entries.emplace_back(detail::trim(line.substr(0, eq)),
                                               detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline ConfigFile parse_config(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline std::string serialize_config(const ConfigFile& cfg) {
    std::string out;
    for (const auto& b : cfg.blocks) {
        out += "[" + b.name + "]\n";
        for (const auto& [k, v] : b.entries) out += k + " = " + v + "\n";
        out += "\n";
    }
    return out;
}

// [space] block: either `preset = name` or explicit n / d / beta / gamma / label.
inline HomSpaceSpec parse_space(const ConfigBlock& blk) {
    if (const std::string* preset = blk.find("preset")) {
        auto s = make_preset(*preset);
        if (!s) throw config_error("config [space]: unknown preset '" + *preset + "'");
        return *s;
    }
    if (!blk.has("n")) throw config_error("config [space]: need `preset` or explicit `n`");
    const int n = static_cast<int>(detail::parse_long(*blk.find("n"), "[space] n"));
    if (n < 1) throw config_error("config [space]: n must be >= 1");
    std::vector<int> d;
    for (double v : detail::parse_array(blk.has("d") ? *blk.find("d") : "", "[space] d"))
        d.push_back(static_cast<int>(v));
    std::vector<double> beta =
        detail::parse_array(blk.has("beta") ? *blk.find("beta") : "", "[space] beta");
    std::vector<double> gamma(static_cast<std::size_t>(n) * n * n, 0.0);
    for (const auto& quad : blk.find_all("gamma")) {
        const auto vals = detail::parse_array(quad, "[space] gamma");
        if (vals.size() != 4)
            throw config_error("config [space]: gamma entries are (i, k, l, value) quadruples");
        const int i = static_cast<int>(vals[0]), k = static_cast<int>(vals[1]),
                  l = static_cast<int>(vals[2]);
        if (i < 0 || i >= n || k < 0 || k >= n || l < 0 || l >= n)
            throw config_error("config [space]: gamma index out of range (zero-based)");
        gamma[static_cast<std::size_t>((i * n + k) * n + l)] = vals[3];
    }
    HomSpaceSpec s = make_space(n, std::move(d), std::move(beta), std::move(gamma),
                                blk.has("label") ? *blk.find("label") : "custom");
    if (const std::string* mono = blk.find("monotypic_asserted"))
        s.monotypic_asserted = (*mono == "true" || *mono == "1");
    return s;
}

inline ConfigBlock serialize_space(const HomSpaceSpec& s) {
    ConfigBlock blk;
    blk.name = "space";
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    blk.entries.emplace_back("n", std::to_string(s.n));
    std::string ds, bs;
    for (int i = 0; i < s.n; ++i) {
        ds += (i ? " " : "") + std::to_string(s.d[static_cast<std::size_t>(i)]);
        bs += (i ? " " : "") + num(s.beta[static_cast<std::size_t>(i)]);
    }
    blk.entries.emplace_back("d", ds);
    blk.entries.emplace_back("beta", bs);
    for (int i = 0; i < s.n; ++i)
        for (int k = 0; k < s.n; ++k)
            for (int l = 0; l < s.n; ++l)
                if (s.gamma_at(i, k, l) != 0.0)
                    blk.entries.emplace_back("gamma", std::to_string(i) + " " + std::to_string(k) +
                                                          " " + std::to_string(l) + " " +
                                                          num(s.gamma_at(i, k, l)));
    blk.entries.emplace_back("label", s.label);
    blk.entries.emplace_back("monotypic_asserted", s.monotypic_asserted ? "true" : "false");
    return blk;
}

inline SystemParams parse_params(const ConfigBlock& blk) {
    SystemParams p;
    if (blk.has("m")) p.m = detail::parse_double(*blk.find("m"), "[params] m");
    if (blk.has("lambda")) p.lambda = detail::parse_double(*blk.find("lambda"), "[params] lambda");
    if (blk.has("h2")) p.h2 = detail::parse_double(*blk.find("h2"), "[params] h2");
    p.validate();
    return p;
}

inline IntegratorOptions parse_integrator_options(const ConfigBlock& blk) {
    IntegratorOptions o;
    if (blk.has("rel_tol")) o.rel_tol = detail::parse_double(*blk.find("rel_tol"), "rel_tol");
    if (blk.has("abs_tol")) o.abs_tol = detail::parse_double(*blk.find("abs_tol"), "abs_tol");
    if (blk.has("blowup_threshold"))
        o.blowup_threshold = detail::parse_double(*blk.find("blowup_threshold"), "blowup_threshold");
    if (blk.has("min_step")) o.min_step = detail::parse_double(*blk.find("min_step"), "min_step");
    if (blk.has("max_steps")) o.max_steps = detail::parse_long(*blk.find("max_steps"), "max_steps");
    o.validate();
    return o;
}

inline BvpOptions parse_bvp_options(const ConfigBlock& blk) {
    BvpOptions o;
    if (blk.has("bvp_tol")) o.bvp_tol = detail::parse_double(*blk.find("bvp_tol"), "bvp_tol");
    if (blk.has("newton_max_iters"))
        o.newton_max_iters =
            static_cast<int>(detail::parse_long(*blk.find("newton_max_iters"), "newton_max_iters"));
    if (blk.has("continuation_min_step"))
        o.continuation_min_step =
            detail::parse_double(*blk.find("continuation_min_step"), "continuation_min_step");
    if (blk.has("init_step_p"))
        o.init_step_p = detail::parse_double(*blk.find("init_step_p"), "init_step_p");
    if (blk.has("init_step_h2"))
        o.init_step_h2 = detail::parse_double(*blk.find("init_step_h2"), "init_step_h2");
    o.ode = parse_integrator_options(blk);
    // BVP shots default to tighter tolerances than plain runs
    if (!blk.has("rel_tol")) o.ode.rel_tol = 1e-12;
    if (!blk.has("abs_tol")) o.ode.abs_tol = 1e-14;
    o.validate();
    return o;
}

inline DirichletData parse_dirichlet(const ConfigBlock& blk, int n) {
    DirichletData d;
    d.a = detail::parse_array(blk.has("a") ? *blk.find("a") : "", "[dirichlet] a");
    d.b = detail::parse_array(blk.has("b") ? *blk.find("b") : "", "[dirichlet] b");
    if (blk.has("u0")) d.u0 = detail::parse_double(*blk.find("u0"), "[dirichlet] u0");
    if (blk.has("u1")) d.u1 = detail::parse_double(*blk.find("u1"), "[dirichlet] u1");
    d.validate(n);
    return d;
}

inline PhaseState parse_seed_state(const ConfigBlock& blk, int n, const std::string& where) {
    PhaseState s;
    s.t = blk.has("t0") ? detail::parse_double(*blk.find("t0"), where + " t0") : 0.0;
    s.y = detail::parse_array(blk.has("y") ? *blk.find("y") : "", where + " y");
    s.L = detail::parse_array(blk.has("L") ? *blk.find("L") : "", where + " L");
    if (blk.has("xi")) s.xi = detail::parse_double(*blk.find("xi"), where + " xi");
    if (static_cast<int>(s.y.size()) != n || static_cast<int>(s.L.size()) != n)
        throw config_error("config " + where + ": y and L must have length n");
    return s;
}

// The mode blocks; a run config must contain exactly one.
inline std::string config_mode_block(const ConfigFile& cfg) {
    static const char* kModes[] = {"ivp", "dirichlet", "scan", "blowup", "circle", "bounds"};
    std::string found;
    for (const char* m : kModes) {
        if (cfg.has(m)) {
            if (!found.empty())
                throw config_error("config: blocks [" + found + "] and [" + m +
                                   "] are both present; exactly one mode block is allowed");
            found = m;
        }
    }
    if (found.empty())
        throw config_error(
            "config: need exactly one mode block ([ivp], [dirichlet], [scan], [blowup], [circle] "
            "or [bounds])");
    return found;
}

} // namespace coqe
