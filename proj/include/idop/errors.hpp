#pragma once

#include <stdexcept>
#include <string>

namespace idop {

/// Bad or inconsistent input: malformed files, shape mismatches, out-of-range
/// options. CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Parse failure in a text input; carries the 1-based (row, column) of the
/// offending cell when known.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, long row, long col)
        : ValidationError(what + " at (" + std::to_string(row) + "," + std::to_string(col) + ")"),
          row_(row), col_(col) {}
    long row() const { return row_; }
    long col() const { return col_; }

private:
    long row_;
    long col_;
};

/// Numerical failure: divergent integration, optimizer breakdown, internal
/// rank inconsistencies. CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IntegrationError : public NumericError {
public:
    IntegrationError(const std::string& what, double at)
        : NumericError(what + " at grid value " + std::to_string(at)), at_(at) {}
    double at() const { return at_; }

private:
    double at_;
};

}  // namespace idop
