#pragma once

// Homogeneous-space data model and the algebraic curvature maps r, R, Dr,
// plus sampled estimates of the ratio bounds c1, c2, c3.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "coqe/errors.hpp"

namespace coqe {

// Structure constants (n, d_i, beta_i, gamma^l_{ik}) of a compact homogeneous
// space with pairwise non-isomorphic isotropy summands. beta and gamma are
// taken as given data; deriving them from Lie-group input is out of scope.
struct HomSpaceSpec {
    int n = 0;
    std::vector<int> d;          // summand dimensions, d_i >= 1
    std::vector<double> beta;    // beta_i >= 0
    std::vector<double> gamma;   // flattened n^3, entry (i,k,l) = gamma^l_{ik} >= 0
    std::string label;
    // The monotypic condition cannot be checked from this data; the user asserts it.
    bool monotypic_asserted = true;

    double gamma_at(int i, int k, int l) const {
        return gamma[static_cast<std::size_t>((i * n + k) * n + l)];
    }
    double& gamma_at(int i, int k, int l) {
        return gamma[static_cast<std::size_t>((i * n + k) * n + l)];
    }

    // Total dimension sum(d_i); the trace weight of the reduced system.
    int total_dim() const { return std::accumulate(d.begin(), d.end(), 0); }

    // All summand dimensions >= 2: the hypothesis behind the lower ratio bound
    // c3 > 0 and the blow-up rate bound.
    bool dimension_hypothesis() const {
        for (int di : d)
            if (di < 2) return false;
        return true;
    }

    // beta and gamma all zero: R == 0 and the curvature maps vanish identically.
    bool degenerate() const {
        for (double b : beta)
            if (b != 0.0) return false;
        for (double g : gamma)
            if (g != 0.0) return false;
        return true;
    }

    void validate() const {
        if (n < 1) throw parameter_error("homspace: n must be >= 1");
        if (static_cast<int>(d.size()) != n || static_cast<int>(beta.size()) != n ||
            gamma.size() != static_cast<std::size_t>(n) * n * n)
            throw parameter_error("homspace: array sizes inconsistent with n");
        for (int i = 0; i < n; ++i) {
            if (d[i] < 1) throw parameter_error("homspace: d_i must be >= 1");
            if (beta[i] < 0.0) throw parameter_error("homspace: beta_i must be >= 0");
        }
        for (double g : gamma)
            if (g < 0.0) throw parameter_error("homspace: gamma entries must be >= 0");
    }
};

// max |gamma^l_{ik} - gamma^l_{ki}|. No symmetry convention is imposed on
// gamma; asymmetry in the lower index pair is reported as a warning because
// the majorant bound |r_i| <= R relies on it.
inline double gamma_symmetry_defect(const HomSpaceSpec& s) {
    double defect = 0.0;
    for (int i = 0; i < s.n; ++i)
        for (int k = 0; k < s.n; ++k)
            for (int l = 0; l < s.n; ++l)
                defect = std::max(defect, std::abs(s.gamma_at(i, k, l) - s.gamma_at(k, i, l)));
    return defect;
}

inline HomSpaceSpec make_space(int n, std::vector<int> d, std::vector<double> beta,
                               std::vector<double> gamma, std::string label) {
    HomSpaceSpec s;
    s.n = n;
    s.d = std::move(d);
    s.beta = std::move(beta);
    if (gamma.empty()) gamma.assign(static_cast<std::size_t>(n) * n * n, 0.0);
    s.gamma = std::move(gamma);
    s.label = std::move(label);
    s.validate();
    return s;
}

// Shipped presets. No other structure constants are bundled; multi-summand
// spaces come in through the config file.
inline HomSpaceSpec preset_circle() { return make_space(1, {1}, {0.0}, {}, "circle"); }
inline HomSpaceSpec preset_sphere2() { return make_space(1, {2}, {1.0}, {}, "sphere2"); }
inline HomSpaceSpec preset_torus(int dim) {
    return make_space(1, {dim}, {0.0}, {}, "torus(" + std::to_string(dim) + ")");
}

// Parses "circle", "sphere2", "torus(N)".
inline std::optional<HomSpaceSpec> make_preset(const std::string& name) {
    if (name == "circle") return preset_circle();
    if (name == "sphere2") return preset_sphere2();
    if (name.rfind("torus(", 0) == 0 && name.back() == ')') {
        try {
            int dim = std::stoi(name.substr(6, name.size() - 7));
            if (dim >= 1) return preset_torus(dim);
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

namespace detail {

// Largest |y_i| accepted by the curvature maps. Beyond this the dynamics
// module is expected to have flagged blow-up already.
inline constexpr double kMaxLogCoefficient = 300.0;
// exp() overflows just above this.
inline constexpr double kMaxExponent = 709.0;

inline void check_y(const HomSpaceSpec& s, const std::vector<double>& y) {
    if (static_cast<int>(y.size()) != s.n)
        throw parameter_error("curvature map: y has wrong dimension");
    for (int i = 0; i < s.n; ++i) {
        if (!std::isfinite(y[i]) || std::abs(y[i]) > kMaxLogCoefficient)
            throw domain_overflow_error(
                "curvature map: |y_" + std::to_string(i + 1) + "| too large", i);
    }
}

// exp of a combined exponent, guarded; `who` names the component for the error.
inline double safe_exp(double arg, int who) {
    if (arg > kMaxExponent)
        throw domain_overflow_error(
            "curvature map: exponent overflow in component " + std::to_string(who + 1), who);
    return std::exp(arg);
}

} // namespace detail

// r_i(y) = beta_i/(2 e^{2y_i})
//        + sum_{k,l} gamma^l_{ik} (e^{4y_i} - 2 e^{4y_k}) / (4 e^{2y_i+2y_k+2y_l}).
// The three-exponential products are combined in log-space and exponentiated once.
inline std::vector<double> ricci_map(const HomSpaceSpec& s, const std::vector<double>& y) {
    detail::check_y(s, y);
    std::vector<double> r(static_cast<std::size_t>(s.n));
    for (int i = 0; i < s.n; ++i) {
        double ri = 0.5 * s.beta[i] * detail::safe_exp(-2.0 * y[i], i);
        for (int k = 0; k < s.n; ++k) {
            for (int l = 0; l < s.n; ++l) {
                const double g = s.gamma_at(i, k, l);
                if (g == 0.0) continue;
                const double plus = detail::safe_exp(2.0 * y[i] - 2.0 * y[k] - 2.0 * y[l], i);
                const double minus = detail::safe_exp(-2.0 * y[i] + 2.0 * y[k] - 2.0 * y[l], i);
                ri += 0.25 * g * (plus - 2.0 * minus);
            }
        }
        r[static_cast<std::size_t>(i)] = ri;
    }
    return r;
}

// R(y) = sum_i beta_i e^{-2y_i} + sum_{i,j,k} gamma^k_{ij} e^{2y_i-2y_j-2y_k};
// every term of r appears in R in absolute value, so R majorizes |r|.
inline double ricci_majorant(const HomSpaceSpec& s, const std::vector<double>& y) {
    detail::check_y(s, y);
    double R = 0.0;
    for (int i = 0; i < s.n; ++i) R += s.beta[i] * detail::safe_exp(-2.0 * y[i], i);
    for (int i = 0; i < s.n; ++i)
        for (int j = 0; j < s.n; ++j)
            for (int k = 0; k < s.n; ++k) {
                const double g = s.gamma_at(i, j, k);
                if (g == 0.0) continue;
                R += g * detail::safe_exp(2.0 * y[i] - 2.0 * y[j] - 2.0 * y[k], i);
            }
    return R;
}

// dR/dy_j, used by the |M'| <= s M^2 growth monitor.
inline std::vector<double> ricci_majorant_gradient(const HomSpaceSpec& s,
                                                   const std::vector<double>& y) {
    detail::check_y(s, y);
    std::vector<double> grad(static_cast<std::size_t>(s.n), 0.0);
    for (int i = 0; i < s.n; ++i)
        grad[static_cast<std::size_t>(i)] -= 2.0 * s.beta[i] * detail::safe_exp(-2.0 * y[i], i);
    for (int i = 0; i < s.n; ++i)
        for (int j = 0; j < s.n; ++j)
            for (int k = 0; k < s.n; ++k) {
                const double g = s.gamma_at(i, j, k);
                if (g == 0.0) continue;
                const double term = g * detail::safe_exp(2.0 * y[i] - 2.0 * y[j] - 2.0 * y[k], i);
                grad[static_cast<std::size_t>(i)] += 2.0 * term;
                grad[static_cast<std::size_t>(j)] -= 2.0 * term;
                grad[static_cast<std::size_t>(k)] -= 2.0 * term;
            }
    return grad;
}

// Analytic Jacobian Dr, row-major n x n, entry (i,j) = dr_i/dy_j.
inline std::vector<double> ricci_jacobian(const HomSpaceSpec& s, const std::vector<double>& y) {
    detail::check_y(s, y);
    const int n = s.n;
    std::vector<double> J(static_cast<std::size_t>(n) * n, 0.0);
    auto at = [&](int i, int j) -> double& { return J[static_cast<std::size_t>(i * n + j)]; };
    for (int i = 0; i < n; ++i) {
        at(i, i) -= s.beta[i] * detail::safe_exp(-2.0 * y[i], i);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                const double g = s.gamma_at(i, k, l);
                if (g == 0.0) continue;
                const double plus = detail::safe_exp(2.0 * y[i] - 2.0 * y[k] - 2.0 * y[l], i);
                const double minus = detail::safe_exp(-2.0 * y[i] + 2.0 * y[k] - 2.0 * y[l], i);
                // d/dy_j of 0.25*g*(plus - 2*minus), term by term
                at(i, i) += 0.5 * g * (plus + 2.0 * minus);
                at(i, k) += 0.5 * g * (-plus - 2.0 * minus);
                at(i, l) += 0.5 * g * (-plus + 2.0 * minus);
            }
    }
    return J;
}

// Sampled estimates of the curvature ratio bounds over a finite box.
struct RicciBoundEstimates {
    double c1 = 0.0;        // max |r|_2 / R over samples
    double c2 = 0.0;        // max |Dr|_F / R
    double c3 = 0.0;        // min |r|_2 / R
    long samples = 0;
    double box_radius = 0.0;
};

// Deterministic given (samples, box_radius, seed): uniforms are drawn from the
// raw engine bits, so results do not depend on the standard library.
inline RicciBoundEstimates estimate_ricci_bounds(const HomSpaceSpec& s, long samples,
                                                 double box_radius, std::uint64_t seed) {
    if (samples < 1) throw parameter_error("estimate_ricci_bounds: samples must be >= 1");
    if (!(box_radius > 0.0)) throw parameter_error("estimate_ricci_bounds: box_radius must be > 0");
    if (s.degenerate())
        throw degenerate_space_error("estimate_ricci_bounds: R vanishes identically (torus-like space)");

    // splitmix64 stream mapped to [0,1): bit-identical across platforms,
    // unlike the standard library distributions
    std::uint64_t state = seed ? seed : 0x9e3779b97f4a7c15ULL;
    auto next_u64 = [&state]() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    auto next_unit = [&next_u64]() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; };

    RicciBoundEstimates est;
    est.samples = samples;
    est.box_radius = box_radius;
    est.c3 = std::numeric_limits<double>::infinity();
    std::vector<double> y(static_cast<std::size_t>(s.n));
    for (long k = 0; k < samples; ++k) {
        for (int i = 0; i < s.n; ++i) y[static_cast<std::size_t>(i)] = (2.0 * next_unit() - 1.0) * box_radius;
        const double R = ricci_majorant(s, y);
        const auto r = ricci_map(s, y);
        const auto Dr = ricci_jacobian(s, y);
        double rn = 0.0;
        for (double v : r) rn += v * v;
        rn = std::sqrt(rn);
        double jn = 0.0;
        for (double v : Dr) jn += v * v;
        jn = std::sqrt(jn);
        est.c1 = std::max(est.c1, rn / R);
        est.c2 = std::max(est.c2, jn / R);
        est.c3 = std::min(est.c3, rn / R);
    }
    return est;
}

} // namespace coqe
