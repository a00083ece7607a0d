#pragma once

// Test-only oracles, independent of the solver paths they check: closed-form
// Riccati solutions, finite differences, Simpson quadrature over dense output,
// a collocation BVP solver, and a small deterministic RNG for property tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "coqe/dynamics.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// deterministic RNG (splitmix64), independent of the standard library

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int integer(int lo, int hi) { // inclusive
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

  private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// closed forms for the scalar Riccati L' = -L^2 - lambda

// lambda > 0: L(t) = w tan(w (phi - t)), w = sqrt(lambda)
inline double riccati_tan(double lambda, double phi, double t) {
    const double w = std::sqrt(lambda);
    return w * std::tan(w * (phi - t));
}

// the m = 0 torus cone: y = ln(t)/sqrt(d), L = 1/(sqrt(d) t), xi = 1/t
inline double cone_y(int d, double t) { return std::log(t) / std::sqrt(static_cast<double>(d)); }
inline double cone_L(int d, double t) { return 1.0 / (std::sqrt(static_cast<double>(d)) * t); }

// ---------------------------------------------------------------------------
// central finite differences of the Ricci map

inline std::vector<double> ricci_jacobian_fd(const coqe::HomSpaceSpec& s,
                                             const std::vector<double>& y, double step) {
    const int n = s.n;
    std::vector<double> J(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        std::vector<double> yp = y, ym = y;
        yp[static_cast<std::size_t>(j)] += step;
        ym[static_cast<std::size_t>(j)] -= step;
        const auto rp = coqe::ricci_map(s, yp);
        const auto rm = coqe::ricci_map(s, ym);
        for (int i = 0; i < n; ++i)
            J[static_cast<std::size_t>(i * n + j)] =
                (rp[static_cast<std::size_t>(i)] - rm[static_cast<std::size_t>(i)]) / (2.0 * step);
    }
    return J;
}

// ---------------------------------------------------------------------------
// Simpson quadrature of xi over the dense steps (independent of the augmented
// quadrature state carried by the integrator)

inline double simpson_xi_integral(const coqe::Trajectory& traj) {
    const int n = traj.dim();
    double total = 0.0;
    std::vector<double> buf;
    for (const auto& blk : traj.dense) {
        buf.resize(blk.dim());
        blk.eval(0.0, buf.data());
        const double f0 = buf[static_cast<std::size_t>(2 * n)];
        blk.eval(0.5, buf.data());
        const double fm = buf[static_cast<std::size_t>(2 * n)];
        blk.eval(1.0, buf.data());
        const double f1 = buf[static_cast<std::size_t>(2 * n)];
        total += blk.h / 6.0 * (f0 + 4.0 * fm + f1);
    }
    return total;
}

// ---------------------------------------------------------------------------
// collocation oracle for the one-summand sphere BVP (beta in r hard-coded, so
// this does not share the library's curvature path): solves
//   y'' = -xi y' + h2 (beta/2 e^{-2y} - lambda),
//   xi' = -d L^2 - m (d L - xi)^2 - h2 lambda,  integral of xi = c,
//   y(0) = a, y(1) = b
// on a uniform mesh with second-order differences and trapezoid steps.

struct CollocationResult {
    std::vector<double> t, y, xi;
    bool converged = false;
};

inline CollocationResult collocate_sphere_bvp(int d, double beta, double m, double lambda,
                                              double h2, double a, double b, double c, int mesh) {
    const int N = mesh;              // intervals
    const double dt = 1.0 / N;
    const int ny = N + 1, nxi = N + 1;
    const int dim = ny + nxi;        // unknowns: y_0..y_N, xi_0..xi_N

    std::vector<double> x(static_cast<std::size_t>(dim), 0.0);
    for (int j = 0; j <= N; ++j)
        x[static_cast<std::size_t>(j)] = a + (b - a) * j / N; // linear initial guess

    auto L_at = [&](const std::vector<double>& v, int j) {
        if (j == 0) return (v[1] - v[0]) / dt;
        if (j == N) return (v[static_cast<std::size_t>(N)] - v[static_cast<std::size_t>(N - 1)]) / dt;
        return (v[static_cast<std::size_t>(j + 1)] - v[static_cast<std::size_t>(j - 1)]) / (2.0 * dt);
    };

    auto residual = [&](const std::vector<double>& v, std::vector<double>& F) {
        const double* y = v.data();
        const double* xi = v.data() + ny;
        int row = 0;
        F.assign(static_cast<std::size_t>(dim), 0.0);
        F[static_cast<std::size_t>(row++)] = y[0] - a;
        for (int j = 1; j < N; ++j) {
            const double ypp = (y[j + 1] - 2.0 * y[j] + y[j - 1]) / (dt * dt);
            const double yp = (y[j + 1] - y[j - 1]) / (2.0 * dt);
            F[static_cast<std::size_t>(row++)] =
                ypp + xi[j] * yp - h2 * (0.5 * beta * std::exp(-2.0 * y[j]) - lambda);
        }
        F[static_cast<std::size_t>(row++)] = y[N] - b;
        auto g = [&](int j) {
            const double L = L_at(v, j);
            const double drift = d * L - xi[j];
            return -d * L * L - m * drift * drift - h2 * lambda;
        };
        for (int j = 0; j < N; ++j)
            F[static_cast<std::size_t>(row++)] =
                (xi[j + 1] - xi[j]) - 0.5 * dt * (g(j) + g(j + 1));
        double integral = 0.0;
        for (int j = 0; j < N; ++j) integral += 0.5 * dt * (xi[j] + xi[j + 1]);
        F[static_cast<std::size_t>(row++)] = integral - c;
    };

    // dense-LU Newton (self-contained)
    auto lu = [&](std::vector<double>& A, std::vector<double>& rhs) {
        const int n = dim;
        for (int col = 0; col < n; ++col) {
            int piv = col;
            double best = std::abs(A[static_cast<std::size_t>(col) * n + col]);
            for (int r = col + 1; r < n; ++r) {
                const double val = std::abs(A[static_cast<std::size_t>(r) * n + col]);
                if (val > best) { best = val; piv = r; }
            }
            if (best == 0.0) return false;
            if (piv != col)
                for (int k = 0; k <= n; ++k) {
                    double& lhs = (k < n) ? A[static_cast<std::size_t>(col) * n + k]
                                          : rhs[static_cast<std::size_t>(col)];
                    double& rhs2 = (k < n) ? A[static_cast<std::size_t>(piv) * n + k]
                                           : rhs[static_cast<std::size_t>(piv)];
                    std::swap(lhs, rhs2);
                }
            for (int r = col + 1; r < n; ++r) {
                const double f = A[static_cast<std::size_t>(r) * n + col] /
                                 A[static_cast<std::size_t>(col) * n + col];
                if (f == 0.0) continue;
                for (int k = col; k < n; ++k)
                    A[static_cast<std::size_t>(r) * n + k] -=
                        f * A[static_cast<std::size_t>(col) * n + k];
                rhs[static_cast<std::size_t>(r)] -= f * rhs[static_cast<std::size_t>(col)];
            }
        }
        for (int r = dim - 1; r >= 0; --r) {
            double acc = rhs[static_cast<std::size_t>(r)];
            for (int k = r + 1; k < dim; ++k)
                acc -= A[static_cast<std::size_t>(r) * dim + k] * rhs[static_cast<std::size_t>(k)];
            rhs[static_cast<std::size_t>(r)] = acc / A[static_cast<std::size_t>(r) * dim + r];
        }
        return true;
    };

    std::vector<double> F, Fp, J(static_cast<std::size_t>(dim) * dim);
    CollocationResult out;
    for (int it = 0; it < 50; ++it) {
        residual(x, F);
        double fn = 0.0;
        for (double v : F) fn = std::max(fn, std::abs(v));
        if (fn < 1e-12) {
            out.converged = true;
            break;
        }
        for (int col = 0; col < dim; ++col) {
            const double delta = 1e-7 * std::max(1.0, std::abs(x[static_cast<std::size_t>(col)]));
            std::vector<double> xp = x;
            xp[static_cast<std::size_t>(col)] += delta;
            residual(xp, Fp);
            for (int r = 0; r < dim; ++r)
                J[static_cast<std::size_t>(r) * dim + col] =
                    (Fp[static_cast<std::size_t>(r)] - F[static_cast<std::size_t>(r)]) / delta;
        }
        std::vector<double> step = F;
        for (double& v : step) v = -v;
        std::vector<double> A = J;
        if (!lu(A, step)) break;
        for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] += step[static_cast<std::size_t>(j)];
    }
    out.t.resize(static_cast<std::size_t>(N + 1));
    out.y.assign(x.begin(), x.begin() + ny);
    out.xi.assign(x.begin() + ny, x.end());
    for (int j = 0; j <= N; ++j) out.t[static_cast<std::size_t>(j)] = static_cast<double>(j) / N;
    return out;
}

// ---------------------------------------------------------------------------
// random test spaces

inline coqe::HomSpaceSpec random_space(Rng& rng, bool curved, bool symmetric_gamma = true) {
    const int n = rng.integer(1, 3);
    std::vector<int> d;
    std::vector<double> beta;
    for (int i = 0; i < n; ++i) {
        d.push_back(rng.integer(1, 4));
        beta.push_back(curved ? rng.uniform(0.0, 2.0) : 0.0);
    }
    std::vector<double> gamma(static_cast<std::size_t>(n) * n * n, 0.0);
    if (curved && n > 1) {
        for (int i = 0; i < n; ++i)
            for (int k = 0; k <= i; ++k)
                for (int l = 0; l < n; ++l) {
                    if (rng.unit() < 0.5) continue;
                    const double v = rng.uniform(0.0, 1.0);
                    gamma[static_cast<std::size_t>((i * n + k) * n + l)] = v;
                    if (symmetric_gamma) gamma[static_cast<std::size_t>((k * n + i) * n + l)] = v;
                }
    }
    return coqe::make_space(n, std::move(d), std::move(beta), std::move(gamma), "random");
}

inline coqe::HomSpaceSpec two_summand_space() {
    // fixed curved two-summand space with lower-pair-symmetric gamma
    std::vector<double> gamma(8, 0.0);
    auto set = [&](int i, int k, int l, double v) {
        gamma[static_cast<std::size_t>((i * 2 + k) * 2 + l)] = v;
    };
    set(0, 1, 1, 0.4);
    set(1, 0, 1, 0.4);
    set(1, 1, 0, 0.6);
    set(0, 0, 1, 0.2);
    return coqe::make_space(2, {2, 3}, {1.0, 0.5}, std::move(gamma), "two-summand");
}

} // namespace oracles
