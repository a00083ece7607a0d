#pragma once

// The reduced first-order quasi-Einstein system
//   xi' = -tr(L^2) - m (tr L - xi)^2 - h^2 lambda
//   L'  = -xi L + h^2 r(y) - h^2 lambda
//   y'  = L
// with weighted traces tr X = sum d_i X_i, tr X^2 = sum d_i X_i^2. The phase
// vector is augmented with the quadrature variable Ixi = integral of xi, which
// carries the boundary-integral constraint and the reconstruction of u at
// integrator accuracy.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coqe/errors.hpp"
#include "coqe/homspace.hpp"
#include "coqe/ode.hpp"

namespace coqe {

struct SystemParams {
    double m = 0.0;       // Bakry-Emery parameter, >= 0
    double lambda = 0.0;  // quasi-Einstein constant
    double h2 = 1.0;      // squared lapse, >= 0; h2 = 0 selects the limit system

    void validate() const {
        if (!(m >= 0.0)) throw parameter_error("params: m must be >= 0");
        if (!(h2 >= 0.0)) throw parameter_error("params: h2 must be >= 0");
    }
};

struct PhaseState {
    double t = 0.0;
    std::vector<double> y;  // log metric coefficients
    std::vector<double> L;  // shape-operator entries, L = y'
    double xi = 0.0;        // sum d_i y_i' - u'

    bool finite() const {
        if (!std::isfinite(t) || !std::isfinite(xi)) return false;
        for (double v : y)
            if (!std::isfinite(v)) return false;
        for (double v : L)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct IntegratorOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double blowup_threshold = 1e8;  // stop once M(t) exceeds this
    double min_step = 0.0;          // 0: 1e-14 * |interval|
    long max_steps = 1000000;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw parameter_error("integrator options: tolerances must be > 0");
        if (!(blowup_threshold > 0.0))
            throw parameter_error("integrator options: blowup_threshold must be > 0");
    }
    OdeOptions ode() const { return OdeOptions{rel_tol, abs_tol, min_step, max_steps}; }
};

enum class Termination { reached_end, blow_up_detected, step_underflow };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::reached_end: return "reached_end";
        case Termination::blow_up_detected: return "blow_up_detected";
        default: return "step_underflow";
    }
}

inline double weighted_trace(const std::vector<int>& d, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += d[i] * x[i];
    return s;
}

inline double weighted_trace_sq(const std::vector<int>& d, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += d[i] * x[i] * x[i];
    return s;
}

// M(t) >= 0 with M^2 = xi^2 + tr(L^2) + R(y); unbounded exactly at singularities.
inline double m_functional(const HomSpaceSpec& space, const std::vector<double>& y,
                           const std::vector<double>& L, double xi) {
    return std::sqrt(xi * xi + weighted_trace_sq(space.d, L) + ricci_majorant(space, y));
}

struct VectorField {
    std::vector<double> dy, dL;
    double dxi = 0.0;
};

// Right-hand side of the reduced system at one state.
inline VectorField vector_field(const HomSpaceSpec& space, const SystemParams& params,
                                const PhaseState& state) {
    if (!state.finite()) throw parameter_error("vector_field: non-finite state");
    if (static_cast<int>(state.y.size()) != space.n || static_cast<int>(state.L.size()) != space.n)
        throw parameter_error("vector_field: state dimension mismatch");
    VectorField f;
    f.dy = state.L;
    const double trL = weighted_trace(space.d, state.L);
    const double trL2 = weighted_trace_sq(space.d, state.L);
    const double drift = trL - state.xi; // = u'
    f.dxi = -trL2 - params.m * drift * drift - params.h2 * params.lambda;
    f.dL.resize(state.L.size());
    if (params.h2 != 0.0) {
        const auto r = ricci_map(space, state.y);
        for (std::size_t i = 0; i < f.dL.size(); ++i)
            f.dL[i] = -state.xi * state.L[i] + params.h2 * (r[i] - params.lambda);
    } else {
        for (std::size_t i = 0; i < f.dL.size(); ++i) f.dL[i] = -state.xi * state.L[i];
    }
    return f;
}

// Integrated solution: samples at the accepted nodes, the xi quadrature, and
// the per-step dense blocks over the full augmented state [y, L, xi, Ixi].
struct Trajectory {
    HomSpaceSpec space;
    SystemParams params;
    std::vector<PhaseState> samples;
    std::vector<double> xi_integral;  // Ixi at each sample, Ixi(first) = 0
    std::vector<double> u;            // filled by reconstruct_u; empty otherwise
    std::vector<DenseStep> dense;
    long accepted_steps = 0;
    long rejected_steps = 0;
    Termination termination = Termination::reached_end;
    double blowup_time = 0.0;  // dense-refined threshold crossing when blow-up was detected

    int dim() const { return space.n; }
    std::size_t size() const { return samples.size(); }
    double t_front() const { return samples.front().t; }
    double t_back() const { return samples.back().t; }

    bool contains(double t) const {
        const double lo = std::min(t_front(), t_back());
        const double hi = std::max(t_front(), t_back());
        return t >= lo && t <= hi;
    }

    // index of the dense block covering t
    std::size_t block_of(double t) const {
        if (dense.empty()) throw parameter_error("trajectory: no dense data");
        const bool fwd = t_back() > t_front();
        std::size_t lo = 0, hi = dense.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            const double tend = dense[mid].t0 + dense[mid].h;
            if (fwd ? (t <= tend) : (t >= tend))
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

    void eval_raw(double t, std::vector<double>& out) const {
        const auto& b = dense[block_of(t)];
        out.resize(b.dim());
        b.eval(b.theta_of(t), out.data());
    }
    void eval_raw_derivative(double t, std::vector<double>& out) const {
        const auto& b = dense[block_of(t)];
        out.resize(b.dim());
        b.eval_derivative(b.theta_of(t), out.data());
    }

    PhaseState state_at(double t) const {
        if (!contains(t)) throw parameter_error("trajectory: t outside the integrated range");
        const int n = dim();
        std::vector<double> buf;
        eval_raw(t, buf);
        PhaseState s;
        s.t = t;
        s.y.assign(buf.begin(), buf.begin() + n);
        s.L.assign(buf.begin() + n, buf.begin() + 2 * n);
        s.xi = buf[static_cast<std::size_t>(2 * n)];
        return s;
    }

    double xi_integral_at(double t) const {
        std::vector<double> buf;
        eval_raw(t, buf);
        return buf[static_cast<std::size_t>(2 * dim() + 1)];
    }
};

namespace detail {

inline std::vector<double> pack_state(const PhaseState& s, double ixi) {
    std::vector<double> x;
    x.reserve(s.y.size() * 2 + 2);
    x.insert(x.end(), s.y.begin(), s.y.end());
    x.insert(x.end(), s.L.begin(), s.L.end());
    x.push_back(s.xi);
    x.push_back(ixi);
    return x;
}

inline PhaseState unpack_state(int n, double t, const std::vector<double>& x) {
    PhaseState s;
    s.t = t;
    s.y.assign(x.begin(), x.begin() + n);
    s.L.assign(x.begin() + n, x.begin() + 2 * n);
    s.xi = x[static_cast<std::size_t>(2 * n)];
    return s;
}

struct PhaseRhs {
    const HomSpaceSpec& space;
    const SystemParams& params;

    void operator()(double /*t*/, const double* x, double* dx) const {
        const int n = space.n;
        const double* y = x;
        const double* L = x + n;
        const double xi = x[2 * n];
        double trL = 0.0, trL2 = 0.0;
        for (int i = 0; i < n; ++i) {
            trL += space.d[i] * L[i];
            trL2 += space.d[i] * L[i] * L[i];
        }
        const double drift = trL - xi;
        for (int i = 0; i < n; ++i) dx[i] = L[i];
        if (params.h2 != 0.0) {
            thread_local std::vector<double> ybuf;
            ybuf.assign(y, y + n);
            const auto r = ricci_map(space, ybuf);
            for (int i = 0; i < n; ++i)
                dx[n + i] = -xi * L[i] + params.h2 * (r[i] - params.lambda);
        } else {
            for (int i = 0; i < n; ++i) dx[n + i] = -xi * L[i];
        }
        dx[2 * n] = -trL2 - params.m * drift * drift - params.h2 * params.lambda;
        dx[2 * n + 1] = xi;
    }
};

} // namespace detail

// Adaptive integration of the reduced system from `initial` to t_end, in either
// time direction, stopping early when M(t) exceeds the blow-up threshold or the
// step size underflows.
inline Trajectory integrate(const HomSpaceSpec& space, const SystemParams& params,
                            const PhaseState& initial, double t_end,
                            const IntegratorOptions& opts = {}) {
    space.validate();
    params.validate();
    opts.validate();
    if (!initial.finite()) throw parameter_error("integrate: non-finite initial state");
    if (static_cast<int>(initial.y.size()) != space.n ||
        static_cast<int>(initial.L.size()) != space.n)
        throw parameter_error("integrate: initial state dimension mismatch");
    if (t_end == initial.t) throw parameter_error("integrate: t_end equals initial.t");

    detail::PhaseRhs rhs{space, params};
    const int n = space.n;
    std::vector<double> ybuf(static_cast<std::size_t>(n)), Lbuf(static_cast<std::size_t>(n));
    bool blew_up = false;
    auto monitor = [&](double /*t*/, const std::vector<double>& x) {
        for (int i = 0; i < n; ++i) {
            ybuf[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
            Lbuf[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(n + i)];
        }
        const double M = m_functional(space, ybuf, Lbuf, x[static_cast<std::size_t>(2 * n)]);
        if (M > opts.blowup_threshold) {
            blew_up = true;
            return false;
        }
        return true;
    };

    OdeResult ode = integrate_dopri5(rhs, detail::pack_state(initial, 0.0), initial.t, t_end,
                                     opts.ode(), monitor);
    if (ode.status == OdeStatus::max_steps_exceeded)
        throw error("integrate: max_steps exceeded before reaching t_end");

    Trajectory traj;
    traj.space = space;
    traj.params = params;
    traj.accepted_steps = ode.accepted;
    traj.rejected_steps = ode.rejected;
    traj.dense = std::move(ode.dense);
    traj.samples.reserve(ode.t.size());
    traj.xi_integral.reserve(ode.t.size());
    for (std::size_t j = 0; j < ode.t.size(); ++j) {
        traj.samples.push_back(detail::unpack_state(n, ode.t[j], ode.x[j]));
        traj.xi_integral.push_back(ode.x[j][static_cast<std::size_t>(2 * n + 1)]);
    }
    if (blew_up) {
        traj.termination = Termination::blow_up_detected;
        // locate the threshold crossing inside the final step via dense bisection
        const auto& b = traj.dense.back();
        double lo = 0.0, hi = 1.0;
        std::vector<double> buf(b.dim());
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            b.eval(mid, buf.data());
            for (int i = 0; i < n; ++i) {
                ybuf[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(i)];
                Lbuf[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(n + i)];
            }
            double M;
            try {
                M = m_functional(space, ybuf, Lbuf, buf[static_cast<std::size_t>(2 * n)]);
            } catch (const domain_overflow_error&) {
                M = std::numeric_limits<double>::infinity();
            }
            (M > opts.blowup_threshold ? hi : lo) = mid;
        }
        traj.blowup_time = b.t0 + hi * b.h;
    } else if (ode.status == OdeStatus::step_underflow) {
        traj.termination = Termination::step_underflow;
    } else {
        traj.termination = Termination::reached_end;
    }
    return traj;
}

// u at each sample from u' = tr(L) - xi: u = u0 + sum d_i (y_i - y_i(0)) - Ixi,
// exact at the integrator's own order through the augmented quadrature state.
inline std::vector<double> reconstruct_u(const Trajectory& traj, double u0) {
    if (traj.samples.empty()) throw parameter_error("reconstruct_u: empty trajectory");
    const auto& d = traj.space.d;
    const auto& y0 = traj.samples.front().y;
    std::vector<double> u(traj.samples.size());
    for (std::size_t j = 0; j < traj.samples.size(); ++j) {
        double dy = 0.0;
        for (std::size_t i = 0; i < y0.size(); ++i)
            dy += d[i] * (traj.samples[j].y[i] - y0[i]);
        u[j] = u0 + dy - (traj.xi_integral[j] - traj.xi_integral.front());
    }
    return u;
}

struct QeResidual {
    double res_first = 0.0;               // max |first line of the unreduced system|
    std::vector<double> res_second;       // per-summand max |second line|
    double max_second() const {
        double m = 0.0;
        for (double v : res_second) m = std::max(m, v);
        return m;
    }
};

// Residuals of the unreduced second-order system evaluated at the sample nodes,
// with u from reconstruct_u (u' via the dense-output derivative of the
// reconstructed potential) and y'', xi' from the right-hand sides of the reduced
// system. On a consistent trajectory both lines cancel to roundoff; tampering
// with the samples relative to the dense data shows up at full scale.
inline QeResidual qe_residual(const HomSpaceSpec& space, const SystemParams& params,
                              const Trajectory& traj) {
    if (traj.u.size() != traj.samples.size())
        throw parameter_error("qe_residual: trajectory has no reconstructed u");
    if (traj.dense.empty()) throw parameter_error("qe_residual: trajectory has no dense data");
    const int n = space.n;
    QeResidual out;
    out.res_second.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> dbuf;
    for (std::size_t j = 0; j < traj.samples.size(); ++j) {
        const PhaseState& s = traj.samples[j];
        // u' from the dense derivative of u = u0 + sum d_i y_i - Ixi
        const std::size_t blk = (j == 0) ? 0 : j - 1;
        const auto& b = traj.dense[blk];
        dbuf.resize(b.dim());
        b.eval_derivative(j == 0 ? 0.0 : 1.0, dbuf.data());
        double du = -dbuf[static_cast<std::size_t>(2 * n + 1)];
        for (int i = 0; i < n; ++i) du += space.d[i] * dbuf[static_cast<std::size_t>(i)];

        const VectorField f = vector_field(space, params, s);
        const double trL = weighted_trace(space.d, s.L);
        const auto r = (params.h2 != 0.0) ? ricci_map(space, s.y)
                                          : std::vector<double>(static_cast<std::size_t>(n), 0.0);
        // u'' from the reduced right-hand sides: u'' = tr(L') - xi'
        double upp = -f.dxi;
        for (int i = 0; i < n; ++i) upp += space.d[i] * f.dL[static_cast<std::size_t>(i)];

        double line1 = upp - params.m * du * du - params.h2 * params.lambda;
        for (int i = 0; i < n; ++i)
            line1 -= space.d[i] * (f.dL[static_cast<std::size_t>(i)] +
                                   s.L[static_cast<std::size_t>(i)] * s.L[static_cast<std::size_t>(i)]);
        out.res_first = std::max(out.res_first, std::abs(line1));

        for (int i = 0; i < n; ++i) {
            const double Li = s.L[static_cast<std::size_t>(i)];
            const double line2 = params.h2 * r[static_cast<std::size_t>(i)] - Li * trL + du * Li -
                                 f.dL[static_cast<std::size_t>(i)] - params.h2 * params.lambda;
            out.res_second[static_cast<std::size_t>(i)] =
                std::max(out.res_second[static_cast<std::size_t>(i)], std::abs(line2));
        }
    }
    return out;
}

// The warped-product scalar mu = v v'' + v v' tr L + (1/m - 1) v'^2 + lambda v^2
// with v = e^{-m u}; constant along exact solutions of the unit-lapse system.
// u' comes from tr(L) - xi and u'' from the first line of the unreduced system,
// so no numerical differentiation enters.
inline std::vector<double> mu_invariant(const SystemParams& params, const Trajectory& traj,
                                        const std::vector<double>& u) {
    if (!(params.m > 0.0)) throw parameter_error("mu_invariant: requires m > 0");
    if (u.size() != traj.samples.size())
        throw parameter_error("mu_invariant: u array does not match trajectory samples");
    const auto& space = traj.space;
    std::vector<double> mu(traj.samples.size());
    for (std::size_t j = 0; j < traj.samples.size(); ++j) {
        const PhaseState& s = traj.samples[j];
        const VectorField f = vector_field(space, params, s);
        const double trL = weighted_trace(space.d, s.L);
        const double up = trL - s.xi;
        double upp = params.h2 * params.lambda + params.m * up * up;
        for (int i = 0; i < space.n; ++i)
            upp += space.d[i] * (f.dL[static_cast<std::size_t>(i)] +
                                 s.L[static_cast<std::size_t>(i)] * s.L[static_cast<std::size_t>(i)]);
        const double v = std::exp(-params.m * u[j]);
        const double vp = -params.m * up * v;
        const double vpp = (-params.m * upp + params.m * params.m * up * up) * v;
        mu[j] = v * vpp + v * vp * trL + (1.0 / params.m - 1.0) * vp * vp +
                params.lambda * v * v;
    }
    return mu;
}

} // namespace coqe
