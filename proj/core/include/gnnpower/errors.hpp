#pragma once

#include <stdexcept>
#include <string>

namespace gnnpower {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A transmitter coincides with a receiver it must reach (infinite gain).
class DegenerateGeometry : public Error { using Error::Error; };

/// Matrix/vector dimensions do not agree.
class ShapeMismatch : public Error { using Error::Error; };

/// A forward trace does not belong to the given parameters/channel.
class TraceMismatch : public Error { using Error::Error; };

/// An operation that needs at least one slot received none.
class EmptyBatch : public Error { using Error::Error; };

/// Index vector is not a bijection on {0..K-1}.
class InvalidPermutation : public Error { using Error::Error; };

/// Module index outside {0..M-1}.
class IndexOutOfRange : public Error { using Error::Error; };

/// M^L exceeds the configured enumeration cap.
class SearchSpaceTooLarge : public Error { using Error::Error; };

/// Empty input to a statistics routine.
class EmptyInput : public Error { using Error::Error; };

/// Zero Gram norm in a similarity computation.
class DegenerateInput : public Error { using Error::Error; };

/// A rate-gain reference value that must be positive is not.
class NonpositiveReference : public Error { using Error::Error; };

/// Malformed config/checkpoint/dataset text.
class ParseError : public Error { using Error::Error; };

/// Structurally valid input with inconsistent values.
class ValidationError : public Error { using Error::Error; };

/// Unknown experiment preset name.
class UnknownPreset : public Error { using Error::Error; };

/// Filesystem failure while reading or writing artifacts.
class IoError : public Error { using Error::Error; };

} // namespace gnnpower
