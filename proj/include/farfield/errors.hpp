// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace farfield {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value (bad cap radius, node count below minimum, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// Point or direction outside the domain an operation is defined on.
struct DomainError : Error {
    using Error::Error;
};

/// Ray/surface geometry violated (ray strikes from behind, inadmissible pair).
struct GeometryError : Error {
    using Error::Error;
};

/// Source/target caps violate the admissibility margin.
struct AdmissibilityError : Error {
    using Error::Error;
};

/// Emitted energy cannot cover the prescribed target measure.
struct BudgetError : Error {
    using Error::Error;
};

/// A target energy is unreachable within the focal-parameter bracket.
struct InfeasibleError : Error {
    using Error::Error;
};

/// Grid too coarse for the requested operation.
struct ResolutionError : Error {
    using Error::Error;
};

/// Degenerate matrix/denominator in a diagnostic computation.
struct SingularError : Error {
    using Error::Error;
};

/// File read/write failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace farfield
