#pragma once

#include <stdexcept>
#include <string>

namespace voxclass {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed container or file contents (bad WAV header, bad manifest line).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed input using an encoding we do not handle.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Audio too short to yield a single analysis segment.
class InsufficientAudioError : public Error {
public:
    using Error::Error;
};

/// A numeric argument outside its admissible range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Spectrum with no energy; cannot be normalized.
class SilenceError : public Error {
public:
    using Error::Error;
};

/// Frequency that does not lie on the log grid it is used with.
class GridError : public Error {
public:
    using Error::Error;
};

/// Too few samples, classes or subjects for the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Model whose parameters violate their invariants (e.g. covariance not SPD).
class ModelCorruptError : public Error {
public:
    using Error::Error;
};

/// Inconsistent run configuration (fold counts, durations, mismatched models).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Identifiers that do not match between two inputs that must be joined.
class JoinError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace voxclass
