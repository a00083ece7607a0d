#pragma once

// CSV emission at full round-trip precision (17 significant digits) so that
// downstream fits are reproducible bit for bit.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coqe/dynamics.hpp"
#include "coqe/singularity.hpp"

namespace coqe {

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

// Header: t, y_1..y_n, L_1..L_n, xi, u, M, Mt. The u column is blank unless the
// potential was reconstructed; M and Mt are blank unless requested (their
// origin t0 comes from the singularity analysis).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool with_M = false,
                                 double mt_origin = 0.0) {
    const int n = traj.dim();
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",y_" << i;
    for (int i = 1; i <= n; ++i) os << ",L_" << i;
    os << ",xi,u,M,Mt\n";
    const bool with_u = traj.u.size() == traj.samples.size();
    for (std::size_t j = 0; j < traj.samples.size(); ++j) {
        const PhaseState& s = traj.samples[j];
        os << csv_num(s.t);
        for (double v : s.y) os << ',' << csv_num(v);
        for (double v : s.L) os << ',' << csv_num(v);
        os << ',' << csv_num(s.xi);
        os << ',';
        if (with_u) os << csv_num(traj.u[j]);
        if (with_M) {
            const BlowupValue bv = blowup_functional(traj.space, s, mt_origin);
            os << ',' << csv_num(bv.M) << ',' << csv_num(bv.Mt);
        } else {
            os << ",,";
        }
        os << '\n';
    }
}

inline void write_scan_csv(std::ostream& os, const std::vector<ScanPoint>& points) {
    os << "k1,y_end,converged\n";
    for (const auto& p : points) {
        os << csv_num(p.k1) << ',';
        if (p.converged) os << csv_num(p.y_end);
        os << ',' << (p.converged ? 1 : 0) << '\n';
    }
}

inline void write_rescaled_csv(std::ostream& os, const RescaledTrajectory& rt, int n) {
    os << "s";
    for (int i = 1; i <= n; ++i) os << ",y_" << i;
    for (int i = 1; i <= n; ++i) os << ",L_" << i;
    os << ",xi\n";
    for (const auto& s : rt.samples) {
        os << csv_num(s.s);
        for (double v : s.y) os << ',' << csv_num(v);
        for (double v : s.L) os << ',' << csv_num(v);
        os << ',' << csv_num(s.xi) << '\n';
    }
}

} // namespace coqe
