#pragma once

#include <stdexcept>
#include <string>

namespace spinsim {

// Error categories map onto CLI exit codes: config = 2, infeasible = 3,
// numerical = 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spinsim
