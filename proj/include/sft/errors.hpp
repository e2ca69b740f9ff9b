#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sft {

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data does not conform to the trial schema. `row()` is 1-based, 0 when
/// the problem is not tied to a row.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what, std::size_t row = 0)
        : std::runtime_error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Numerical breakdown inside a solver (should not happen on valid input).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sft
