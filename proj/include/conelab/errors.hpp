#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace conelab {

/// Raised when a caller violates a documented precondition.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative or nonlinear solve fails to converge.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> history = {})
        : std::runtime_error(what), residual_history(std::move(history)) {}

    std::vector<double> residual_history;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw UsageError(message);
}

} // namespace conelab
