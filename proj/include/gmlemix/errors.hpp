#pragma once

#include <stdexcept>
#include <string>

namespace gmlemix {

// Malformed user input: bad observations, bad configs, unreadable files.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an optimizer (degenerate likelihood, no convergence).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// The chi-square-constrained region of the confidence interval is empty.
class InfeasibleRegionError : public std::runtime_error {
public:
    explicit InfeasibleRegionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gmlemix
