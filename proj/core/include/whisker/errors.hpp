#pragma once

#include <stdexcept>
#include <string>

namespace whisker {

// Invalid user-supplied data: malformed config, bad geometry, out-of-range
// parameters. The message names the offending field or value.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical solve failed to converge. Carries the final residual norm so
// callers can report how far off the solve ended up.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& msg, double residual_norm)
        : std::runtime_error(msg + " (residual norm " + std::to_string(residual_norm) + ")"),
          residual_norm_(residual_norm) {}

    double residual_norm() const { return residual_norm_; }

private:
    double residual_norm_;
};

// Filesystem or serialization failure: unreadable file, parse error,
// write failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace whisker
