#pragma once

#include <stdexcept>
#include <string>

namespace coqe {

// Base class for everything this library throws.
class error : public std::runtime_error {
  public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed config file or CLI input.
class config_error : public error {
  public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

// Argument outside an operation's stated domain (m=0 for mu, bad tolerances, ...).
class parameter_error : public error {
  public:
    explicit parameter_error(const std::string& msg) : error(msg) {}
};

// An exponential in the curvature maps would overflow; carries the offending summand.
class domain_overflow_error : public error {
  public:
    domain_overflow_error(const std::string& msg, int index_) : error(msg), index(index_) {}
    int index;
};

// R == 0 identically (torus); ratio bounds are undefined.
class degenerate_space_error : public error {
  public:
    explicit degenerate_space_error(const std::string& msg) : error(msg) {}
};

// A shot blew up before reaching the far boundary.
class shot_diverged_error : public error {
  public:
    shot_diverged_error(const std::string& msg, double blowup_time_)
        : error(msg), blowup_time(blowup_time_) {}
    double blowup_time;
};

class newton_diverged_error : public error {
  public:
    explicit newton_diverged_error(const std::string& msg) : error(msg) {}
};

// Continuation step underflow; p_reached/h2_reached give the last solved point
// (h2_reached is the empirically reached existence threshold).
class continuation_stalled_error : public error {
  public:
    continuation_stalled_error(const std::string& msg, double p_reached_, double h2_reached_)
        : error(msg), p_reached(p_reached_), h2_reached(h2_reached_) {}
    double p_reached;
    double h2_reached;
};

// analyze_blowup ran to the end of the interval without detecting a singularity.
class no_singularity_error : public error {
  public:
    explicit no_singularity_error(const std::string& msg) : error(msg) {}
};

// Every shot in a scan diverged.
class all_shots_diverged_error : public error {
  public:
    explicit all_shots_diverged_error(const std::string& msg) : error(msg) {}
};

} // namespace coqe
