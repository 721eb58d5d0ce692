#pragma once

#include <stdexcept>
#include <string>

namespace avi {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotSquare : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotSymmetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Estimator evaluated outside the alpha regime it is defined for.
struct RegimeUnsupported : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Closed-form SNR requested where the defining moment integral diverges.
struct ExistenceViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A sample overflowed (exp argument beyond the 64-bit range). Surfaced as an
// error so infinite-variance regimes are diagnosed instead of silently
// producing inf.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every Monte Carlo sample was the zero vector; the SNR ratio is 0/0.
struct DegenerateAllZero : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    int row;
    int col;
    ParseError(int row_, int col_, const std::string& what_)
        : std::runtime_error("parse error at row " + std::to_string(row_) +
                             ", column " + std::to_string(col_) + ": " + what_),
          row(row_), col(col_) {}
};

struct MissingClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace avi
