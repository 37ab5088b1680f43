#pragma once

#include <stdexcept>
#include <string>

namespace emlab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// point outside the interior of a domain; margin is the (non-positive) distance proxy
struct DomainError : Error {
    double margin;
    DomainError(const std::string& what, double m) : Error(what), margin(m) {}
};

struct DualDomainError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };
struct InfeasibleError : Error { using Error::Error; };
struct ModelError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };

}  // namespace emlab
