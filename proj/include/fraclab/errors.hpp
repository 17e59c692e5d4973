#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

/// Argument outside the mathematical domain of an operation (s outside (0,1), x inside Omega, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inputs that do not belong together (grid built for another domain, vector of the wrong length).
class ConsistencyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The discrete problem is singular or degenerate for the data supplied.
class DegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A factorization or direct solve failed, or its residual exceeded the admissible bound.
class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fraclab
