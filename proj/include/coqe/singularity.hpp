#pragma once

// Blow-up diagnostics: the functional M(t), the bound quantity M(t)*t, the
// rescaled system near a singularity, and power-law rate fitting.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coqe/dynamics.hpp"

namespace coqe {

struct BlowupValue {
    double M = 0.0;
    double Mt = 0.0;  // M * (t - t_origin), signed, origin supplied by the caller
};

// M^2 = xi^2 + tr(L^2) + R(y); Mt relative to t_origin (default 0, the
// convention that puts the singularity at the left endpoint).
inline BlowupValue blowup_functional(const HomSpaceSpec& space, const PhaseState& state,
                                     double t_origin = 0.0) {
    if (!state.finite()) throw parameter_error("blowup_functional: non-finite state");
    BlowupValue v;
    v.M = m_functional(space, state.y, state.L, state.xi);
    v.Mt = v.M * (state.t - t_origin);
    return v;
}

enum class Direction { backward, forward };

inline const char* to_string(Direction d) {
    return d == Direction::backward ? "backward" : "forward";
}

struct PowerLawFit {
    double exponent = 0.0;      // p in M ~ C (t - t_sing)^{-p}
    double log_coeff = 0.0;     // ln C
    double rms_residual = 0.0;
    long count = 0;
};

// Least squares of log M against log dist; exponent is minus the slope.
inline PowerLawFit fit_power_law(const std::vector<double>& dist, const std::vector<double>& M) {
    if (dist.size() != M.size() || dist.size() < 2)
        throw parameter_error("fit_power_law: need at least two samples");
    const std::size_t n = dist.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(dist[i]);
        ly[i] = std::log(M[i]);
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    if (denom == 0.0) throw parameter_error("fit_power_law: degenerate abscissae");
    const double slope = (dn * sxy - sx * sy) / denom;
    PowerLawFit fit;
    fit.exponent = -slope;
    fit.log_coeff = (sy - slope * sx) / dn;
    fit.count = static_cast<long>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ly[i] - (fit.log_coeff + slope * lx[i]);
        ss += e * e;
    }
    fit.rms_residual = std::sqrt(ss / dn);
    return fit;
}

struct BlowupReport {
    double t_sing = 0.0;        // estimated singular time from step collapse
    double sup_Mt = 0.0;        // sup over samples of M * dist(t, t_sing)
    double exponent = 0.0;      // fitted p in M ~ C dist^{-p}
    double fit_residual = 0.0;  // RMS residual of the log-log fit
    long fit_samples = 0;
    std::vector<std::string> diagnostics;  // rate-bound violations, hypothesis warnings
};

struct BlowupAnalysis {
    BlowupReport report;
    Trajectory trajectory;
};

namespace detail {

// Extrapolate the singular time from the geometric collapse of the last
// accepted step endpoints: Aitken delta-squared estimates from the trailing
// triples, keeping the most asymptotic one that is consistent with decay.
inline double extrapolate_singular_time(const Trajectory& traj) {
    const std::size_t n = traj.samples.size();
    const std::size_t k = std::min<std::size_t>(6, n);
    std::vector<double> t(k);
    for (std::size_t j = 0; j < k; ++j) t[j] = traj.samples[n - k + j].t;
    const double d_last = t[k - 1] - t[k - 2];
    double best = t[k - 1] + d_last; // fallback: one more step of the same size
    for (std::size_t j = 0; j + 2 < k; ++j) {
        const double d0 = t[j + 1] - t[j];
        const double d1 = t[j + 2] - t[j + 1];
        if (d0 == 0.0) continue;
        const double rho = std::clamp(d1 / d0, 0.0, 0.95);
        best = t[j + 2] + d1 * rho / (1.0 - rho); // later triples overwrite earlier ones
    }
    return best;
}

} // namespace detail

// Integrates from the seed in the given direction until blow-up (or step
// underflow), estimates the singular time, and fits the blow-up rate over the
// final decade of M below a tenth of the detection threshold. t_stop bounds the
// run; NaN picks 0 for backward runs (singularities conventionally sit at the
// left endpoint) and seed.t + 10
// for forward runs.
inline BlowupAnalysis analyze_blowup(const HomSpaceSpec& space, const SystemParams& params,
                                     const PhaseState& seed, Direction direction,
                                     const IntegratorOptions& opts = {},
                                     double t_stop = std::numeric_limits<double>::quiet_NaN()) {
    if (std::isnan(t_stop))
        t_stop = (direction == Direction::backward) ? (seed.t > 0.0 ? 0.0 : seed.t - 10.0)
                                                    : seed.t + 10.0;
    if ((direction == Direction::backward && t_stop >= seed.t) ||
        (direction == Direction::forward && t_stop <= seed.t))
        throw parameter_error("analyze_blowup: t_stop on the wrong side of the seed");

    BlowupAnalysis out;
    out.trajectory = integrate(space, params, seed, t_stop, opts);
    const Trajectory& traj = out.trajectory;
    if (traj.termination == Termination::reached_end)
        throw no_singularity_error("analyze_blowup: integration reached the interval end normally");

    BlowupReport& rep = out.report;
    if (!space.dimension_hypothesis())
        rep.diagnostics.push_back(
            "space violates the dimension hypothesis (some d_i < 2); the rate bound is not guaranteed");

    rep.t_sing = detail::extrapolate_singular_time(traj);
    const double sign = (direction == Direction::backward) ? 1.0 : -1.0;
    auto dist = [&](double t) { return sign * (t - rep.t_sing); };

    std::vector<double> dvals, mvals;
    dvals.reserve(traj.samples.size());
    mvals.reserve(traj.samples.size());
    for (const auto& s : traj.samples) {
        const double M = m_functional(space, s.y, s.L, s.xi);
        const double ds = dist(s.t);
        if (ds > 0.0) rep.sup_Mt = std::max(rep.sup_Mt, M * ds);
        dvals.push_back(ds);
        mvals.push_back(M);
    }

    // fit window: one decade in dist ending at the last sample with M below a
    // tenth of the threshold (avoids truncation bias at the stopping value)
    const double m_cap = 0.1 * opts.blowup_threshold;
    double d_end = 0.0;
    for (std::size_t j = 0; j < mvals.size(); ++j)
        if (mvals[j] <= m_cap && dvals[j] > 0.0) d_end = dvals[j]; // samples ordered toward t_sing
    if (d_end <= 0.0)
        throw no_singularity_error("analyze_blowup: no usable samples below the fit cap");
    double factor = 10.0;
    std::vector<double> fd, fm;
    for (int attempt = 0; attempt < 6; ++attempt) {
        fd.clear();
        fm.clear();
        for (std::size_t j = 0; j < mvals.size(); ++j)
            if (dvals[j] >= d_end && dvals[j] <= factor * d_end && mvals[j] <= m_cap) {
                fd.push_back(dvals[j]);
                fm.push_back(mvals[j]);
            }
        if (fd.size() >= 10) break;
        factor *= 10.0; // widen until enough samples
    }
    if (fd.size() < 10)
        throw no_singularity_error("analyze_blowup: fewer than 10 samples available for the rate fit");
    const PowerLawFit fit = fit_power_law(fd, fm);
    rep.exponent = fit.exponent;
    rep.fit_residual = fit.rms_residual;
    rep.fit_samples = fit.count;

    if (space.dimension_hypothesis() && rep.exponent > 1.05)
        rep.diagnostics.push_back("blow-up rate bound violated: fitted exponent " +
                                  std::to_string(rep.exponent) + " exceeds 1.05");
    if (!std::isfinite(rep.sup_Mt))
        rep.diagnostics.push_back("sup M(t)*t is not finite over the sampled run");
    return out;
}

struct RescaledSample {
    double s = 0.0;                 // rescaled time
    std::vector<double> y, L;       // y-tilde, L-tilde
    double xi = 0.0;                // xi-tilde
    std::vector<double> dy, dL;     // d/ds via the dense-output derivative
    double dxi = 0.0;
};

struct RescaledTrajectory {
    double t_anchor = 0.0;
    double M_anchor = 0.0;
    std::vector<RescaledSample> samples;
};

// Resamples the trajectory through the dense output under the zoom
//   y~(s) = y(t_a + s/M_a),  L~(s) = L(.)/M_a,  xi~(s) = xi(.)/M_a,
// so that M of the rescaled state at s = 0 equals 1.
inline RescaledTrajectory rescale(const HomSpaceSpec& space, const Trajectory& traj,
                                  double t_anchor, double window, int points = 201) {
    if (!traj.contains(t_anchor))
        throw parameter_error("rescale: anchor outside the trajectory range");
    if (window < 0.0) throw parameter_error("rescale: window must be >= 0");
    if (points < 1) throw parameter_error("rescale: points must be >= 1");

    const PhaseState anchor = traj.state_at(t_anchor);
    RescaledTrajectory rt;
    rt.t_anchor = t_anchor;
    rt.M_anchor = m_functional(space, anchor.y, anchor.L, anchor.xi);
    if (!(rt.M_anchor > 0.0)) throw parameter_error("rescale: M vanishes at the anchor");

    const int n = space.n;
    const double lo = std::min(traj.t_front(), traj.t_back());
    const double hi = std::max(traj.t_front(), traj.t_back());
    std::vector<double> buf, dbuf;
    const int count = (window == 0.0) ? 1 : points;
    for (int j = 0; j < count; ++j) {
        const double s =
            (count == 1) ? 0.0 : -window + 2.0 * window * static_cast<double>(j) / (count - 1);
        const double t = t_anchor + s / rt.M_anchor;
        if (t < lo || t > hi) continue; // clip to the integrated range
        traj.eval_raw(t, buf);
        traj.eval_raw_derivative(t, dbuf);
        RescaledSample rs;
        rs.s = s;
        rs.y.assign(buf.begin(), buf.begin() + n);
        rs.L.resize(static_cast<std::size_t>(n));
        rs.dy.resize(static_cast<std::size_t>(n));
        rs.dL.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            rs.L[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(n + i)] / rt.M_anchor;
            // chain rule: d/ds = (1/M_a) d/dt, plus the 1/M_a field scaling
            rs.dy[static_cast<std::size_t>(i)] = dbuf[static_cast<std::size_t>(i)] / rt.M_anchor;
            rs.dL[static_cast<std::size_t>(i)] =
                dbuf[static_cast<std::size_t>(n + i)] / (rt.M_anchor * rt.M_anchor);
        }
        rs.xi = buf[static_cast<std::size_t>(2 * n)] / rt.M_anchor;
        rs.dxi = dbuf[static_cast<std::size_t>(2 * n)] / (rt.M_anchor * rt.M_anchor);
        rt.samples.push_back(std::move(rs));
    }
    return rt;
}

// Max residual of the rescaled system over the resampled window, comparing the
// dense-output derivatives against the rescaled right-hand sides (including the
// lambda/M^2 term).
inline double rescaled_residual(const HomSpaceSpec& space, const SystemParams& params,
                                const RescaledTrajectory& rt) {
    double worst = 0.0;
    const double M2 = rt.M_anchor * rt.M_anchor;
    for (const auto& s : rt.samples) {
        const double trL = weighted_trace(space.d, s.L);
        const double trL2 = weighted_trace_sq(space.d, s.L);
        const double drift = trL - s.xi;
        const double rhs_xi =
            -trL2 - params.m * drift * drift - params.h2 * params.lambda / M2;
        worst = std::max(worst, std::abs(s.dxi - rhs_xi));
        const auto r = ricci_map(space, s.y);
        for (int i = 0; i < space.n; ++i) {
            const double rhs_L = -s.xi * s.L[static_cast<std::size_t>(i)] +
                                 params.h2 * (r[static_cast<std::size_t>(i)] - params.lambda) / M2;
            worst = std::max(worst, std::abs(s.dL[static_cast<std::size_t>(i)] - rhs_L));
            worst = std::max(worst, std::abs(s.dy[static_cast<std::size_t>(i)] -
                                             s.L[static_cast<std::size_t>(i)]));
        }
    }
    return worst;
}

// Empirical growth-bound constant: max |M'| / M^2 over the samples, with M'
// from the exact chain rule through the right-hand sides. Finite along every
// trajectory; the monitored form of the |M'| <= s M^2 inequality.
inline double growth_bound_constant(const HomSpaceSpec& space, const SystemParams& params,
                                    const Trajectory& traj) {
    double worst = 0.0;
    for (const auto& s : traj.samples) {
        const double M = m_functional(space, s.y, s.L, s.xi);
        if (M <= 0.0) continue;
        const VectorField f = vector_field(space, params, s);
        const auto gradR = ricci_majorant_gradient(space, s.y);
        double dM2 = 2.0 * s.xi * f.dxi;
        for (int i = 0; i < space.n; ++i) {
            dM2 += 2.0 * space.d[i] * s.L[static_cast<std::size_t>(i)] *
                   f.dL[static_cast<std::size_t>(i)];
            dM2 += gradR[static_cast<std::size_t>(i)] * s.L[static_cast<std::size_t>(i)];
        }
        const double Mp = dM2 / (2.0 * M);
        worst = std::max(worst, std::abs(Mp) / (M * M));
    }
    return worst;
}

// Diagnostic scan mirroring the sup-attaining construction: the sample time
// maximizing M(t) * (t - T) for a caller-chosen T; feeds rescale anchors.
inline std::pair<double, double> anchor_scan(const HomSpaceSpec& space, const Trajectory& traj,
                                             double T) {
    double best_t = traj.samples.front().t;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : traj.samples) {
        if (s.t < T) continue;
        const double v = m_functional(space, s.y, s.L, s.xi) * (s.t - T);
        if (v > best) {
            best = v;
            best_t = s.t;
        }
    }
    if (!std::isfinite(best)) throw parameter_error("anchor_scan: no samples at or beyond T");
    return {best_t, best};
}

} // namespace coqe
