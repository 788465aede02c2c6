#pragma once

#include <stdexcept>
#include <string>

namespace stopvest {

enum class ErrorKind {
    Domain,      // argument outside the function's domain
    Shape,       // dimension mismatch
    Degenerate,  // covariance not SPD
    Config,      // invalid configuration or regime mismatch
    Numeric,     // solver failure (singular system, non-convergence)
    Reconstruction,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by the PSOR solver when the iteration cap is reached.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(ErrorKind::Numeric, what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

}  // namespace stopvest
