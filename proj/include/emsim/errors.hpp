#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emsim {

// Invalid numeric or logical argument to an operation.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Conflicting or impossible geometry (overlapping layers, bad bend radius, ...).
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Port segment could not be mapped onto grid edges.
struct PortResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested grid exceeds the configured memory budget.
struct MemoryBudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Field solver blew up; carries the step at which it was detected.
struct DivergedError : std::runtime_error {
    std::size_t step;
    DivergedError(const std::string& what, std::size_t step_) : std::runtime_error(what), step(step_) {}
};

// Scenario / configuration file problems.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Post-processing failures (bad surface, insufficient excitation, ...).
struct PostProcessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Result artifacts could not be written.
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_positive(double v, const char* name) {
    if (!(v > 0.0)) throw InvalidArgument(std::string(name) + " must be > 0");
}

inline void check_nonnegative(double v, const char* name) {
    if (!(v >= 0.0)) throw InvalidArgument(std::string(name) + " must be >= 0");
}

} // namespace emsim
