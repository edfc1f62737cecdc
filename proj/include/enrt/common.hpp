#pragma once

#include <stdexcept>
#include <string>

namespace enrt {

// Malformed or inconsistent user input (files, flags, domain invariants).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input for which the requested quantity does not exist
// (e.g. a power target that no sample size can reach).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical breakdown: lost bracket, non-convergence, singular system.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Whether a larger or a smaller spillover effect marks the better subgroup.
enum class Direction { maximize, minimize };

inline Direction direction_from_string(const std::string& s) {
    if (s == "maximize") return Direction::maximize;
    if (s == "minimize") return Direction::minimize;
    throw ValidationError("unknown direction '" + s +
                          "' (expected maximize or minimize)");
}

inline const char* to_string(Direction d) {
    return d == Direction::maximize ? "maximize" : "minimize";
}

}  // namespace enrt
