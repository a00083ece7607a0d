#pragma once

// Adaptive embedded Runge-Kutta integration: the Dormand-Prince 5(4) pair with
// its standard fourth-order continuous extension (Hairer, Norsett & Wanner,
// Solving ODEs I, dopri5). Integrates in either time direction; every accepted
// step retains its dense-output coefficients so trajectories can be resampled
// and differentiated between nodes.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "coqe/errors.hpp"

namespace coqe {

enum class OdeStatus { reached_end, stopped_by_monitor, step_underflow, max_steps_exceeded };

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double min_step = 0.0;   // 0: defaults to 1e-14 * |t1 - t0|
    long max_steps = 1000000;
};

// Dense coefficients of one accepted step, evaluation in theta = (t - t0)/h:
//   P(theta) = c0 + theta*(c1 + (1-theta)*(c2 + theta*(c3 + (1-theta)*c4)))
// P matches states and derivatives at both step ends exactly.
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    std::vector<double> c0, c1, c2, c3, c4;

    std::size_t dim() const { return c0.size(); }

    void eval(double theta, double* out) const {
        const double om = 1.0 - theta;
        for (std::size_t i = 0; i < c0.size(); ++i)
            out[i] = c0[i] + theta * (c1[i] + om * (c2[i] + theta * (c3[i] + om * c4[i])));
    }

    // d/dt of the interpolant (dP/dtheta / h).
    void eval_derivative(double theta, double* out) const {
        const double q2 = 1.0 - 2.0 * theta;
        const double q3 = theta * (2.0 - 3.0 * theta);
        const double q4 = 2.0 * theta * (1.0 - theta) * q2;
        for (std::size_t i = 0; i < c0.size(); ++i)
            out[i] = (c1[i] + q2 * c2[i] + q3 * c3[i] + q4 * c4[i]) / h;
    }

    double theta_of(double t) const { return (t - t0) / h; }
};

struct OdeResult {
    OdeStatus status = OdeStatus::reached_end;
    std::vector<double> t;                  // accepted nodes, t[0] = t0
    std::vector<std::vector<double>> x;     // states at the nodes
    std::vector<DenseStep> dense;           // dense.size() == t.size() - 1
    long accepted = 0;
    long rejected = 0;
};

namespace dopri5 {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// embedded error weights (5th-order minus 4th-order)
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// dense-output weights
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

} // namespace dopri5

// F:       void(double t, const double* x, double* dxdt)
// Monitor: bool(double t, const std::vector<double>& x)  -- called after each
//          accepted step; returning false stops the integration.
// F may throw (e.g. curvature overflow during a wild trial step); a throwing
// or non-finite stage evaluation rejects the step and retries with a smaller h.
template <class F, class Monitor>
OdeResult integrate_dopri5(F&& f, const std::vector<double>& x0, double t0, double t1,
                           const OdeOptions& opts, Monitor&& monitor) {
    using namespace dopri5;
    if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0))
        throw parameter_error("integrate: tolerances must be > 0");
    if (t1 == t0) throw parameter_error("integrate: t_end equals initial time");
    const std::size_t n = x0.size();
    for (double v : x0)
        if (!std::isfinite(v)) throw parameter_error("integrate: non-finite initial state");

    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const double hmin = (opts.min_step > 0.0) ? opts.min_step : 1e-14 * span;

    OdeResult res;
    res.t.push_back(t0);
    res.x.push_back(x0);

    std::vector<double> x = x0, xt(n), xnew(n), err(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);

    f(t0, x.data(), k1.data()); // throws on invalid initial state

    // initial step: |x|/|dx| heuristic with conservative caps
    double d0 = 0.0, dd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = opts.abs_tol + opts.rel_tol * std::abs(x[i]);
        d0 += (x[i] / sc) * (x[i] / sc);
        dd += (k1[i] / sc) * (k1[i] / sc);
    }
    double h = 0.01 * span;
    if (dd > 0.0) h = std::min(h, 0.01 * std::sqrt((d0 + 1e-30) / dd));
    h = std::max(h, hmin) * dir;

    double t = t0;
    bool last_rejected = false;

    while (res.accepted + res.rejected < opts.max_steps) {
        const double remaining = t1 - t;
        if (remaining * dir <= 0.0) break;
        const bool final_step = std::abs(h) >= std::abs(remaining);
        if (final_step) h = remaining;

        bool bad_stage = false;
        double err_norm = 0.0;
        try {
            auto stage = [&](double node, const double* coef, int m, std::vector<double>& k) {
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = x[i];
                    const std::vector<double>* ks[6] = {&k1, &k2, &k3, &k4, &k5, &k6};
                    for (int j = 0; j < m; ++j) acc += h * coef[j] * (*ks[j])[i];
                    xt[i] = acc;
                }
                f(t + node * h, xt.data(), k.data());
            };
            {
                const double r2[] = {a21};
                stage(c2, r2, 1, k2);
                const double r3[] = {a31, a32};
                stage(c3, r3, 2, k3);
                const double r4[] = {a41, a42, a43};
                stage(c4, r4, 3, k4);
                const double r5[] = {a51, a52, a53, a54};
                stage(c5, r5, 4, k5);
                const double r6[] = {a61, a62, a63, a64, a65};
                stage(1.0, r6, 5, k6);
            }
            for (std::size_t i = 0; i < n; ++i)
                xnew[i] = x[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                      a76 * k6[i]);
            f(t + h, xnew.data(), k7.data()); // FSAL stage
            for (std::size_t i = 0; i < n; ++i) {
                err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                              e7 * k7[i]);
                const double sc =
                    opts.abs_tol + opts.rel_tol * std::max(std::abs(x[i]), std::abs(xnew[i]));
                err_norm += (err[i] / sc) * (err[i] / sc);
                if (!std::isfinite(xnew[i]) || !std::isfinite(k7[i])) bad_stage = true;
            }
            err_norm = std::sqrt(err_norm / static_cast<double>(n));
            if (!std::isfinite(err_norm)) bad_stage = true;
        } catch (const domain_overflow_error&) {
            bad_stage = true;
        }

        if (bad_stage || err_norm > 1.0) {
            ++res.rejected;
            last_rejected = true;
            const double fac =
                bad_stage ? 0.1 : std::max(0.1, 0.9 * std::pow(err_norm, -0.2));
            h *= std::min(fac, 0.5);
            if (std::abs(h) < hmin) {
                res.status = OdeStatus::step_underflow;
                return res;
            }
            continue;
        }

        // accepted: store node and dense block
        DenseStep ds;
        ds.t0 = t;
        ds.h = h;
        ds.c0 = x;
        ds.c1.resize(n);
        ds.c2.resize(n);
        ds.c3.resize(n);
        ds.c4.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = xnew[i] - x[i];
            const double bspl = h * k1[i] - dx;
            ds.c1[i] = dx;
            ds.c2[i] = bspl;
            ds.c3[i] = dx - h * k7[i] - bspl;
            ds.c4[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                            d7 * k7[i]);
        }
        res.dense.push_back(std::move(ds));

        t = final_step ? t1 : t + h;
        x = xnew;
        k1 = k7; // FSAL
        ++res.accepted;
        res.t.push_back(t);
        res.x.push_back(x);

        if (!monitor(t, x)) {
            res.status = OdeStatus::stopped_by_monitor;
            return res;
        }

        double fac = 0.9 * std::pow(std::max(err_norm, 1e-10), -0.2);
        fac = std::min(last_rejected ? 1.0 : 10.0, std::max(0.2, fac));
        last_rejected = false;
        h *= fac;
        if (std::abs(h) < hmin) h = hmin * dir;
    }

    if ((t1 - t) * dir > 0.0) {
        res.status = OdeStatus::max_steps_exceeded;
        return res;
    }
    res.status = OdeStatus::reached_end;
    return res;
}

} // namespace coqe
