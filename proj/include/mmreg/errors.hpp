#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mmreg {

// Invalid numeric domain, e.g. projecting a point behind the camera.
class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

// API misuse: frame mismatch, bad sizes, missing cameras.
class UsageError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Iterative numeric routine failed to converge.
class NumericError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Closed-form estimation impossible (too few points, degenerate geometry).
class EstimationError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Nonlinear refinement failed. Keeps the parameter vector of the last iterate.
class OptimizationError : public std::runtime_error
{
public:
    OptimizationError(const std::string& what, std::vector<double> lastIterate)
        : std::runtime_error(what)
        , lastIterate_(std::move(lastIterate))
    {
    }
    const std::vector<double>& lastIterate() const { return lastIterate_; }

private:
    std::vector<double> lastIterate_;
};

// Malformed input file. Carries the offending line when known (0 otherwise).
class FormatError : public std::runtime_error
{
public:
    FormatError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what)
        , line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace mmreg
