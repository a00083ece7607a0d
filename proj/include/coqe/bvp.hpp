#pragma once

// Dirichlet boundary-value solver for the reduced system: shooting equations
// closed by the xi quadrature, damped Newton with finite-difference Jacobian,
// and two-stage continuation -- first in the boundary-data homotopy parameter p
// at h^2 = 0 (where the zero unknowns solve the p = 0 problem exactly), then in
// h^2 at p = 1. Also the symmetric-shooting non-uniqueness scan on the 2-sphere
// and the circle non-existence check.

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "coqe/dynamics.hpp"

namespace coqe {

struct DirichletData {
    std::vector<double> a, b;  // y_i(0) and y_i(1) targets
    double u0 = 0.0, u1 = 0.0;

    // c = sum d_i (b_i - a_i) - (u1 - u0); recomputed, never stored.
    double c(const std::vector<int>& d) const {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += d[i] * (b[i] - a[i]);
        return s - (u1 - u0);
    }

    void validate(int n) const {
        if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n)
            throw parameter_error("dirichlet: boundary arrays must have length n");
        for (double v : a)
            if (!std::isfinite(v)) throw parameter_error("dirichlet: non-finite entry in a");
        for (double v : b)
            if (!std::isfinite(v)) throw parameter_error("dirichlet: non-finite entry in b");
        if (!std::isfinite(u0) || !std::isfinite(u1))
            throw parameter_error("dirichlet: non-finite potential endpoint");
    }
};

struct ShootingUnknowns {
    std::vector<double> L0;
    double xi0 = 0.0;
};

struct ContinuationState {
    double p = 0.0;
    double h2 = 0.0;
    ShootingUnknowns unknowns;
    bool converged = false;
    int newton_iters = 0;
    double residual_norm = 0.0;
};

struct BvpOptions {
    double bvp_tol = 1e-10;            // infinity-norm target for the shooting residual
    int newton_max_iters = 50;
    double continuation_min_step = 1e-6;
    double init_step_p = 0.25;
    double init_step_h2 = 0.1;
    IntegratorOptions ode{1e-12, 1e-14, 1e8, 0.0, 1000000};

    void validate() const {
        if (!(bvp_tol > 0.0)) throw parameter_error("bvp options: bvp_tol must be > 0");
        ode.validate();
    }
};

struct NewtonStats {
    long total_iters = 0;
    long solves = 0;
    long continuation_steps = 0;
};

struct BvpSolution {
    Trajectory trajectory;
    DirichletData dirichlet;
    SystemParams params;
    double boundary_error = 0.0;  // max_i(|y_i(0)-a_i|, |y_i(1)-target_i|)
    double integral_error = 0.0;  // |integral of xi - p c|
    ContinuationState final_state;
    NewtonStats stats;
};

namespace detail {

// Gaussian elimination with partial pivoting; A row-major n x n, overwritten.
inline bool lu_solve(std::vector<double>& A, std::vector<double>& rhs, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(A[static_cast<std::size_t>(col * n + col)]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(A[static_cast<std::size_t>(r * n + col)]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0.0 || !std::isfinite(best)) return false;
        if (piv != col) {
            for (int k = col; k < n; ++k)
                std::swap(A[static_cast<std::size_t>(col * n + k)],
                          A[static_cast<std::size_t>(piv * n + k)]);
            std::swap(rhs[static_cast<std::size_t>(col)], rhs[static_cast<std::size_t>(piv)]);
        }
        const double d = A[static_cast<std::size_t>(col * n + col)];
        for (int r = col + 1; r < n; ++r) {
            const double f = A[static_cast<std::size_t>(r * n + col)] / d;
            if (f == 0.0) continue;
            for (int k = col; k < n; ++k)
                A[static_cast<std::size_t>(r * n + k)] -= f * A[static_cast<std::size_t>(col * n + k)];
            rhs[static_cast<std::size_t>(r)] -= f * rhs[static_cast<std::size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = rhs[static_cast<std::size_t>(r)];
        for (int k = r + 1; k < n; ++k)
            acc -= A[static_cast<std::size_t>(r * n + k)] * rhs[static_cast<std::size_t>(k)];
        rhs[static_cast<std::size_t>(r)] = acc / A[static_cast<std::size_t>(r * n + r)];
    }
    return true;
}

inline double norm_inf(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double norm_2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Damped Newton with forward-difference Jacobian on F: R^dim -> R^dim.
// F may throw shot_diverged_error; a diverging trial is treated as a failed
// damping step. Returns iterations used; throws newton_diverged_error.
template <class Fn>
int newton_solve(Fn&& F, std::vector<double>& x, double tol, int max_iters, double* out_norm) {
    const int dim = static_cast<int>(x.size());
    std::vector<double> fx = F(x);
    double fn = norm_inf(fx);
    if (fn <= tol) {
        if (out_norm) *out_norm = fn;
        return 0; // exact root, no iterations (the continuation base case)
    }
    std::vector<double> J(static_cast<std::size_t>(dim) * dim), step, xt(x.size());
    for (int it = 1; it <= max_iters; ++it) {
        // forward differences column by column
        for (int j = 0; j < dim; ++j) {
            const double delta = std::max(1e-7, 1e-7 * std::abs(x[static_cast<std::size_t>(j)]));
            xt = x;
            xt[static_cast<std::size_t>(j)] += delta;
            std::vector<double> fj;
            try {
                fj = F(xt);
            } catch (const shot_diverged_error&) {
                throw newton_diverged_error("newton: shot diverged while forming the Jacobian");
            }
            for (int i = 0; i < dim; ++i)
                J[static_cast<std::size_t>(i * dim + j)] =
                    (fj[static_cast<std::size_t>(i)] - fx[static_cast<std::size_t>(i)]) / delta;
        }
        step = fx;
        for (double& v : step) v = -v;
        std::vector<double> A = J;
        if (!lu_solve(A, step, dim))
            throw newton_diverged_error("newton: singular Jacobian");

        // Armijo-style damping by halving
        const double f2 = norm_2(fx);
        double alpha = 1.0;
        bool accepted = false;
        for (int half = 0; half < 12; ++half) {
            xt = x;
            for (int j = 0; j < dim; ++j)
                xt[static_cast<std::size_t>(j)] += alpha * step[static_cast<std::size_t>(j)];
            std::vector<double> ft;
            bool ok = true;
            try {
                ft = F(xt);
            } catch (const shot_diverged_error&) {
                ok = false;
            }
            if (ok && norm_2(ft) <= (1.0 - 1e-4 * alpha) * f2) {
                x = xt;
                fx = std::move(ft);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) throw newton_diverged_error("newton: damping failed to reduce the residual");
        fn = norm_inf(fx);
        if (fn <= tol) {
            if (out_norm) *out_norm = fn;
            return it;
        }
    }
    throw newton_diverged_error("newton: no convergence within the iteration limit");
}

} // namespace detail

// Shooting residual for the p-interpolated boundary data: integrates from
// y(0) = a with the given (L0, xi0) and returns
//   [ y_i(1) - (a_i + p (b_i - a_i)),  integral of xi - p c ].
// The xi integral is the augmented quadrature state, not post-hoc quadrature.
inline std::vector<double> shooting_residual(const HomSpaceSpec& space, const SystemParams& params,
                                             const DirichletData& dirichlet, double p,
                                             const ShootingUnknowns& unknowns,
                                             const IntegratorOptions& opts = {},
                                             Trajectory* out_traj = nullptr) {
    if (!(p >= 0.0 && p <= 1.0)) throw parameter_error("shooting_residual: p must be in [0,1]");
    dirichlet.validate(space.n);
    PhaseState init;
    init.t = 0.0;
    init.y = dirichlet.a;
    init.L = unknowns.L0;
    init.xi = unknowns.xi0;
    Trajectory traj = integrate(space, params, init, 1.0, opts);
    if (traj.termination != Termination::reached_end)
        throw shot_diverged_error("shooting_residual: trajectory blew up before t=1",
                                  traj.termination == Termination::blow_up_detected
                                      ? traj.blowup_time
                                      : traj.samples.back().t);
    std::vector<double> res(static_cast<std::size_t>(space.n) + 1);
    const PhaseState& end = traj.samples.back();
    for (int i = 0; i < space.n; ++i)
        res[static_cast<std::size_t>(i)] =
            end.y[static_cast<std::size_t>(i)] -
            (dirichlet.a[static_cast<std::size_t>(i)] +
             p * (dirichlet.b[static_cast<std::size_t>(i)] - dirichlet.a[static_cast<std::size_t>(i)]));
    res[static_cast<std::size_t>(space.n)] =
        traj.xi_integral.back() - p * dirichlet.c(space.d);
    if (out_traj) *out_traj = std::move(traj);
    return res;
}

namespace detail {

inline std::vector<double> pack_unknowns(const ShootingUnknowns& u) {
    std::vector<double> x(u.L0);
    x.push_back(u.xi0);
    return x;
}

inline ShootingUnknowns unpack_unknowns(const std::vector<double>& x) {
    ShootingUnknowns u;
    u.L0.assign(x.begin(), x.end() - 1);
    u.xi0 = x.back();
    return u;
}

// Marches a continuation parameter from `from` to `to`, solving the shooting
// equations at each step with warm starts. Steps double after fast solves and
// halve after failures; below min_step the continuation is declared stalled.
// `residual_at` must capture everything else (space, params schedule, data).
template <class ResidualAt>
ContinuationState continue_parameter(ResidualAt&& residual_at, double from, double to,
                                     double init_step, ShootingUnknowns start,
                                     const BvpOptions& opts, NewtonStats& stats,
                                     double* last_solved) {
    ContinuationState st;
    st.unknowns = std::move(start);
    double theta = from;
    if (last_solved) *last_solved = theta;
    std::vector<double> x = pack_unknowns(st.unknowns);

    // solve at the starting parameter (0 iterations at the exact base case)
    double rnorm = 0.0;
    auto F0 = [&](const std::vector<double>& v) { return residual_at(theta, unpack_unknowns(v)); };
    st.newton_iters = newton_solve(F0, x, opts.bvp_tol, opts.newton_max_iters, &rnorm);
    stats.total_iters += st.newton_iters;
    ++stats.solves;
    st.converged = true;
    st.residual_norm = rnorm;
    st.unknowns = unpack_unknowns(x);

    if (to == from) {
        st.p = theta;
        return st;
    }

    const double dir = (to > from) ? 1.0 : -1.0;
    double step = std::min(init_step, std::abs(to - from));
    while (theta * dir < to * dir) {
        const double trial = (std::abs(to - theta) <= step) ? to : theta + dir * step;
        std::vector<double> xt = x;
        bool ok = true;
        int iters = 0;
        try {
            auto F = [&](const std::vector<double>& v) {
                return residual_at(trial, unpack_unknowns(v));
            };
            iters = newton_solve(F, xt, opts.bvp_tol, opts.newton_max_iters, &rnorm);
        } catch (const newton_diverged_error&) {
            ok = false;
        } catch (const shot_diverged_error&) {
            ok = false;
        }
        ++stats.continuation_steps;
        if (ok) {
            theta = trial;
            x = xt;
            stats.total_iters += iters;
            ++stats.solves;
            st.newton_iters = iters;
            st.residual_norm = rnorm;
            st.unknowns = unpack_unknowns(x);
            if (last_solved) *last_solved = theta;
            if (iters <= 3) step = std::min(2.0 * step, std::abs(to - from));
        } else {
            step *= 0.5;
            if (step < opts.continuation_min_step) {
                st.converged = false;
                return st;
            }
        }
    }
    st.converged = true;
    return st;
}

} // namespace detail

// Two-stage homotopy continuation for the Dirichlet problem: p from 0 to 1 at
// h^2 = 0 (starting from the exactly-known zero solution), then h^2 from 0 to
// params.h2 at p = 1. Throws continuation_stalled_error carrying the largest
// h^2 reached, the empirically observed existence threshold.
inline BvpSolution solve_dirichlet(const HomSpaceSpec& space, const SystemParams& params,
                                   const DirichletData& dirichlet, const BvpOptions& opts = {}) {
    space.validate();
    params.validate();
    dirichlet.validate(space.n);
    opts.validate();

    NewtonStats stats;
    ShootingUnknowns zero;
    zero.L0.assign(static_cast<std::size_t>(space.n), 0.0);
    zero.xi0 = 0.0;

    // stage 1: homotopy in the boundary data at h^2 = 0
    SystemParams limit = params;
    limit.h2 = 0.0;
    double p_reached = 0.0;
    auto residual_p = [&](double p, const ShootingUnknowns& u) {
        return shooting_residual(space, limit, dirichlet, p, u, opts.ode);
    };
    ContinuationState s1 = detail::continue_parameter(residual_p, 0.0, 1.0, opts.init_step_p,
                                                      zero, opts, stats, &p_reached);
    if (!s1.converged)
        throw continuation_stalled_error(
            "solve_dirichlet: continuation in p stalled at p = " + std::to_string(p_reached),
            p_reached, 0.0);
    s1.p = 1.0;

    // stage 2: continuation in h^2 at p = 1
    ContinuationState final_state = s1;
    double h2_reached = 0.0;
    if (params.h2 > 0.0) {
        auto residual_h2 = [&](double h2, const ShootingUnknowns& u) {
            SystemParams pr = params;
            pr.h2 = h2;
            return shooting_residual(space, pr, dirichlet, 1.0, u, opts.ode);
        };
        ContinuationState s2 = detail::continue_parameter(residual_h2, 0.0, params.h2,
                                                          opts.init_step_h2, s1.unknowns, opts,
                                                          stats, &h2_reached);
        if (!s2.converged)
            throw continuation_stalled_error(
                "solve_dirichlet: continuation in h^2 stalled at h^2 = " +
                    std::to_string(h2_reached) + " (empirical threshold K)",
                1.0, h2_reached);
        final_state = s2;
        final_state.h2 = params.h2;
    }
    final_state.p = 1.0;

    BvpSolution sol;
    sol.dirichlet = dirichlet;
    sol.params = params;
    sol.stats = stats;
    sol.final_state = final_state;
    Trajectory traj;
    shooting_residual(space, params, dirichlet, 1.0, final_state.unknowns, opts.ode, &traj);
    const PhaseState& end = traj.samples.back();
    double berr = 0.0;
    for (int i = 0; i < space.n; ++i) {
        berr = std::max(berr, std::abs(traj.samples.front().y[static_cast<std::size_t>(i)] -
                                       dirichlet.a[static_cast<std::size_t>(i)]));
        berr = std::max(berr, std::abs(end.y[static_cast<std::size_t>(i)] -
                                       dirichlet.b[static_cast<std::size_t>(i)]));
    }
    sol.boundary_error = berr;
    sol.integral_error = std::abs(traj.xi_integral.back() - dirichlet.c(space.d));
    sol.trajectory = std::move(traj);
    return sol;
}

// The h^2 = 0 limit problem up to homotopy parameter p: the dynamics do not
// depend on beta or gamma at all, so only the summand dimensions enter. The
// boundary targets follow the original problem statement, y(1)-y(0) = p(b-a);
// the proof apparatus' opposite-sign D matrix is documented, not adopted.
inline BvpSolution solve_limit_system(const std::vector<int>& dims, double m,
                                      const DirichletData& dirichlet, double p,
                                      const BvpOptions& opts = {}) {
    if (!(p >= 0.0 && p <= 1.0)) throw parameter_error("solve_limit_system: p must be in [0,1]");
    const int n = static_cast<int>(dims.size());
    HomSpaceSpec space = make_space(n, dims, std::vector<double>(static_cast<std::size_t>(n), 0.0),
                                    {}, "limit");
    SystemParams params;
    params.m = m;
    params.lambda = 0.0;
    params.h2 = 0.0;
    params.validate();
    dirichlet.validate(n);
    opts.validate();

    NewtonStats stats;
    ShootingUnknowns zero;
    zero.L0.assign(static_cast<std::size_t>(n), 0.0);
    double p_reached = 0.0;
    auto residual_p = [&](double q, const ShootingUnknowns& u) {
        return shooting_residual(space, params, dirichlet, q, u, opts.ode);
    };
    ContinuationState st = detail::continue_parameter(residual_p, 0.0, p, opts.init_step_p, zero,
                                                      opts, stats, &p_reached);
    if (!st.converged)
        throw continuation_stalled_error(
            "solve_limit_system: continuation in p stalled at p = " + std::to_string(p_reached),
            p_reached, 0.0);
    st.p = p;

    BvpSolution sol;
    sol.dirichlet = dirichlet;
    sol.params = params;
    sol.stats = stats;
    sol.final_state = st;
    Trajectory traj;
    shooting_residual(space, params, dirichlet, p, st.unknowns, opts.ode, &traj);
    const PhaseState& end = traj.samples.back();
    double berr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double target = dirichlet.a[static_cast<std::size_t>(i)] +
                              p * (dirichlet.b[static_cast<std::size_t>(i)] -
                                   dirichlet.a[static_cast<std::size_t>(i)]);
        berr = std::max(berr, std::abs(end.y[static_cast<std::size_t>(i)] - target));
    }
    sol.boundary_error = berr;
    sol.integral_error = std::abs(traj.xi_integral.back() - p * dirichlet.c(space.d));
    sol.trajectory = std::move(traj);
    return sol;
}

// ---------------------------------------------------------------------------
// Non-uniqueness on the 2-sphere (m = 0, lambda = 0, h^2 = 1)

// The scaled 2-sphere space realizing xi' = -2(y')^2, y'' = e^{-2y} - xi y'
// with unit coefficient (the reference metric scaled so the curvature
// coefficient is 1; beta = 2 in preset normalization halves to 1 in r).
inline HomSpaceSpec sphere2_unit_coefficient() {
    return make_space(1, {2}, {2.0}, {}, "sphere2-eq16");
}

inline SystemParams sphere2_shoot_params() {
    SystemParams p;
    p.m = 0.0;
    p.lambda = 0.0;
    p.h2 = 1.0;
    return p;
}

struct ShootResult {
    double k1 = 0.0;
    double y_end = 0.0;   // y(1)
    Trajectory traj;      // the half-interval trajectory on [1/2, 1]
};

// One symmetric shot: start at t = 1/2 with xi = 0, y' = 0, y = k1 and
// integrate to t = 1. By the reflection symmetry the full solution on [0,1]
// then has y(0) = y(1) and zero xi integral, so one side suffices.
inline ShootResult symmetric_shoot(double k1, const IntegratorOptions& opts = {}) {
    const HomSpaceSpec space = sphere2_unit_coefficient();
    PhaseState init;
    init.t = 0.5;
    init.y = {k1};
    init.L = {0.0};
    init.xi = 0.0;
    ShootResult res;
    res.k1 = k1;
    res.traj = integrate(space, sphere2_shoot_params(), init, 1.0, opts);
    if (res.traj.termination != Termination::reached_end)
        throw shot_diverged_error("symmetric_shoot: blow-up before t=1 (k1 below threshold)",
                                  res.traj.termination == Termination::blow_up_detected
                                      ? res.traj.blowup_time
                                      : res.traj.samples.back().t);
    res.y_end = res.traj.samples.back().y[0];
    return res;
}

struct ScanPoint {
    double k1 = 0.0;
    double y_end = 0.0;
    bool converged = false;
};

struct Fold {
    std::size_t index = 0;  // grid index of the extremum
    double k1 = 0.0;
    double y_end = 0.0;
    bool is_minimum = false;
};

struct LevelPair {
    double ybar = 0.0;     // common boundary value
    double k1_a = 0.0;     // refined crossing left of the fold
    double k1_b = 0.0;     // refined crossing right of the fold
};

struct ScanResult {
    std::vector<ScanPoint> points;
    std::vector<Fold> folds;
    std::vector<LevelPair> pairs;
};

namespace detail {

inline constexpr double kFoldNoiseFloor = 1e-9;

// Bisection for y_end(k1) = ybar on a bracketing interval, to 1e-6 in k1.
inline double refine_level_crossing(double k1_lo, double k1_hi, double ybar,
                                    const IntegratorOptions& opts) {
    auto value = [&](double k1) { return symmetric_shoot(k1, opts).y_end - ybar; };
    double flo = value(k1_lo);
    for (int it = 0; it < 80 && (k1_hi - k1_lo) > 1e-6; ++it) {
        const double mid = 0.5 * (k1_lo + k1_hi);
        const double fm = value(mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
            k1_lo = mid;
            flo = fm;
        } else {
            k1_hi = mid;
        }
    }
    return 0.5 * (k1_lo + k1_hi);
}

} // namespace detail

// Evaluates the symmetric shoot over a k1 grid (diverged shots are skipped),
// reports every sign change of the centered differences of y_end as a fold, and
// refines one bracketing pair of equal-boundary-value shots per fold. Shots run
// on `threads` workers; results are gathered in grid order, so the output does
// not depend on scheduling.
inline ScanResult nonuniqueness_scan(double k1_min, double k1_max, int steps,
                                     const IntegratorOptions& opts = {}, unsigned threads = 0) {
    if (!(k1_min < k1_max)) throw parameter_error("scan: require k1_min < k1_max");
    if (steps < 2) throw parameter_error("scan: require steps >= 2");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(steps));

    ScanResult scan;
    scan.points.resize(static_cast<std::size_t>(steps));
    std::exception_ptr worker_error;
    std::mutex error_mutex;
    auto worker = [&](unsigned w) {
        for (int j = static_cast<int>(w); j < steps; j += static_cast<int>(threads)) {
            const double k1 = k1_min + (k1_max - k1_min) * j / (steps - 1);
            ScanPoint pt;
            pt.k1 = k1;
            try {
                pt.y_end = symmetric_shoot(k1, opts).y_end;
                pt.converged = true;
            } catch (const shot_diverged_error&) {
                pt.converged = false;
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!worker_error) worker_error = std::current_exception();
                return;
            }
            scan.points[static_cast<std::size_t>(j)] = pt;
        }
    };
    if (threads <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
        for (auto& th : pool) th.join();
    }
    if (worker_error) std::rethrow_exception(worker_error);

    bool any = false;
    for (const auto& pt : scan.points) any = any || pt.converged;
    if (!any) throw all_shots_diverged_error("scan: every shot diverged");

    // folds: sign change of centered differences over grid-contiguous shots
    for (std::size_t j = 1; j + 1 < scan.points.size(); ++j) {
        const auto& prev = scan.points[j - 1];
        const auto& cur = scan.points[j];
        const auto& next = scan.points[j + 1];
        if (!prev.converged || !cur.converged || !next.converged) continue;
        const double s1 = cur.y_end - prev.y_end;
        const double s2 = next.y_end - cur.y_end;
        if (std::abs(s1) <= detail::kFoldNoiseFloor || std::abs(s2) <= detail::kFoldNoiseFloor)
            continue;
        if (s1 * s2 < 0.0) {
            Fold f;
            f.index = j;
            f.k1 = cur.k1;
            f.y_end = cur.y_end;
            f.is_minimum = (s1 < 0.0);
            scan.folds.push_back(f);
        }
    }

    // one refined equal-level pair per fold, at a level a quarter of the way
    // up the shallower flank
    for (const auto& f : scan.folds) {
        const double sgn = f.is_minimum ? 1.0 : -1.0;
        // walk each flank while monotone away from the fold
        auto flank_extent = [&](int dir) {
            double extreme = f.y_end;
            std::size_t j = f.index;
            while (true) {
                const std::size_t next = j + static_cast<std::size_t>(dir);
                if (next >= scan.points.size()) break;
                if (!scan.points[next].converged) break;
                const double v = scan.points[next].y_end;
                if (sgn * (v - extreme) < 0.0) break;
                extreme = v;
                j = next;
            }
            return std::make_pair(j, extreme);
        };
        const auto [jl, vl] = flank_extent(-1);
        const auto [jr, vr] = flank_extent(+1);
        const double rise = std::min(sgn * (vl - f.y_end), sgn * (vr - f.y_end));
        if (rise <= 4.0 * detail::kFoldNoiseFloor) continue;
        const double ybar = f.y_end + sgn * 0.25 * rise;

        auto bracket = [&](std::size_t from, std::size_t to, int dir) -> std::optional<LevelPair> {
            for (std::size_t j = from; j != to; j += static_cast<std::size_t>(dir)) {
                const auto& p0 = scan.points[j];
                const auto& p1 = scan.points[j + static_cast<std::size_t>(dir)];
                if (!p0.converged || !p1.converged) return std::nullopt;
                if ((p0.y_end - ybar) * (p1.y_end - ybar) <= 0.0) {
                    LevelPair lp;
                    lp.ybar = ybar;
                    lp.k1_a = detail::refine_level_crossing(std::min(p0.k1, p1.k1),
                                                            std::max(p0.k1, p1.k1), ybar, opts);
                    return lp;
                }
            }
            return std::nullopt;
        };
        auto left = bracket(f.index, jl, -1);
        auto right = bracket(f.index, jr, +1);
        if (left && right) {
            LevelPair lp;
            lp.ybar = ybar;
            lp.k1_a = left->k1_a;
            lp.k1_b = right->k1_a;
            scan.pairs.push_back(lp);
        }
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Non-existence on the circle

enum class CircleVerdict { solvable, unsolvable };

struct CircleCheck {
    CircleVerdict verdict = CircleVerdict::unsolvable;
    double lambda = 0.0;
    // longest pole-free span of the solution family (pi/sqrt(lambda) for
    // lambda > 0, infinite otherwise)
    double max_continuous_span = 0.0;
    double witness_L0 = 0.0;
    std::optional<Trajectory> witness;  // phase trajectory of the witness solution
    int phases_tested = 0;
    int phases_blown_up = 0;  // phases observed to blow up before length 1
};

// With u(0) = u(1) the circle problem reduces to the scalar Riccati
// L' + L^2 + h^2 lambda = 0 on [0,1] closed by zero integral (a = b). For
// lambda > 0 the solutions are the tangent family with phase phi; the check
// searches the phase for one that is continuous and closes, or verifies that
// every phase blows up within unit length (pole spacing pi/sqrt(lambda) < 1).
inline constexpr double kPi = 3.14159265358979323846;

inline CircleCheck circle_nonexistence_check(double lambda, const IntegratorOptions& opts = {}) {
    const HomSpaceSpec space = preset_circle();
    SystemParams params;
    params.m = 0.0;
    params.lambda = lambda;
    params.h2 = 1.0;

    CircleCheck out;
    out.lambda = lambda;

    auto integrate_witness = [&](double L0) {
        PhaseState init;
        init.t = 0.0;
        init.y = {0.0};
        init.L = {L0};
        init.xi = L0; // u' = 0 identically
        return integrate(space, params, init, 1.0, opts);
    };

    if (lambda > 0.0) {
        const double w = std::sqrt(lambda);
        out.max_continuous_span = kPi / w;
        if (out.max_continuous_span <= 1.0) {
            // every member of the tangent family has a pole within length 1:
            // demonstrate over a phase grid
            const int phases = 25;
            for (int j = 0; j < phases; ++j) {
                // phi in (-pi/2w, pi/2w), endpoints excluded
                const double phi = (kPi / w) * ((j + 1.0) / (phases + 1.0) - 0.5);
                Trajectory t = integrate_witness(w * std::tan(w * phi));
                ++out.phases_tested;
                if (t.termination != Termination::reached_end) ++out.phases_blown_up;
            }
            out.verdict = CircleVerdict::unsolvable;
            return out;
        }
        // continuous window of phases: phi in (1 - pi/2w, pi/2w); the closure
        // integral ln cos(w(phi-1)) - ln cos(w phi) is increasing in phi and
        // spans all of R, so bisection finds the closing phase
        double lo = 1.0 - 0.5 * kPi / w, hi = 0.5 * kPi / w;
        const double pad = 1e-12 * (hi - lo);
        lo += pad;
        hi -= pad;
        auto closure = [&](double phi) {
            return std::log(std::cos(w * (phi - 1.0))) - std::log(std::cos(w * phi));
        };
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (closure(mid) < 0.0 ? lo : hi) = mid;
        }
        const double phi = 0.5 * (lo + hi);
        out.witness_L0 = w * std::tan(w * phi);
        out.witness = integrate_witness(out.witness_L0);
        out.phases_tested = 1;
        out.verdict = CircleVerdict::solvable;
        return out;
    }

    out.max_continuous_span = std::numeric_limits<double>::infinity();
    if (lambda == 0.0) {
        out.witness_L0 = 0.0;
        out.witness = integrate_witness(0.0);
        out.verdict = CircleVerdict::solvable;
        return out;
    }
    // lambda < 0: the bounded hyperbolic-tangent family L = w tanh(w(t - phi))
    // closes at phi = 1/2; locate it by the same phase search
    const double w = std::sqrt(-lambda);
    auto closure = [&](double phi) {
        return std::log(std::cosh(w * (1.0 - phi))) - std::log(std::cosh(w * phi));
    };
    double lo = -50.0, hi = 51.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (closure(mid) > 0.0 ? lo : hi) = mid;
    }
    const double phi = 0.5 * (lo + hi);
    out.witness_L0 = w * std::tanh(w * (0.0 - phi));
    out.witness = integrate_witness(out.witness_L0);
    out.phases_tested = 1;
    out.verdict = CircleVerdict::solvable;
    return out;
}

} // namespace coqe
