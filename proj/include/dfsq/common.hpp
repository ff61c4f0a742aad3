#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace dfsq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: unknown names, malformed configs, violated schemas.
struct ConfigError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Divergent integral, non-convergent solver, or similar numeric failure.
struct NumericError : Error {
    using Error::Error;
};

// Resolution too small for the requested structure (K <= M, cell-count guard).
struct ResolutionError : Error {
    using Error::Error;
};

// Raised when a design is inadmissible because the sensitivity vanishes on a
// set of positive probability; callers should switch to the don't-care path.
struct DontCareRequired : Error {
    int variable;
    explicit DontCareRequired(int j, const std::string& what)
        : Error(what), variable(j) {}
};

// Sensitivity values below this are treated as exact zeros so that zero
// regions can be detected from tabulated profiles.
inline constexpr double kGammaClamp = 1e-12;

// Probability mass of clamped sensitivity above which a standard design is
// rejected and routed to the don't-care machinery.
inline constexpr double kClampMassLimit = 1e-6;

inline constexpr double kInvLn2 = 1.4426950408889634;  // 1/ln 2

inline double log2_clamped(double x) {
    return std::log2(x < kGammaClamp ? kGammaClamp : x);
}

}  // namespace dfsq
