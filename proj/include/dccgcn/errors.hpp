#pragma once

#include <stdexcept>
#include <string>

namespace dccgcn {

// Violated call contract (bad argument, missing precondition).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or numerical divergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dccgcn
