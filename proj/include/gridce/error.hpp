#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridce {

// Base of every error raised by the library. The CLI maps the subclasses onto
// exit codes, so new failure modes should derive from one of them.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Trajectories on different grids, wrong lengths, unit mismatches.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Parameter or input outside its admissible set.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Config text that cannot be turned into a scenario. `where` is either
// "line:col" for syntax errors or a JSON pointer for field errors.
class ParseError : public ValidationError {
public:
    ParseError(std::string where, const std::string& what)
        : ValidationError(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

// Balance cannot be met at some time indices even with every load at its
// bound.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::vector<int> indices)
        : Error(what), indices_(std::move(indices)) {}
    const std::vector<int>& violating_indices() const noexcept { return indices_; }

private:
    std::vector<int> indices_;
};

// Iteration cap reached. Carries the best iterate so callers can still write
// partial output.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::vector<double> best_iterate, double residual)
        : Error(what), best_(std::move(best_iterate)), residual_(residual) {}
    const std::vector<double>& best_iterate() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

private:
    std::vector<double> best_;
    double residual_;
};

}  // namespace gridce
