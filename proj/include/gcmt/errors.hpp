#pragma once

#include <stdexcept>
#include <string>

namespace gcmt {

// Base for every error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Matrix shape disagreement; message names both shapes.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid scalar argument (non-positive temperature, bad probability, ...).
struct ParameterError : Error {
    using Error::Error;
};

// Label or index outside its valid range.
struct IndexError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericError : Error {
    using Error::Error;
};

// Collection too small for the requested operation (B < 2, N < C, ...).
struct SizeError : Error {
    using Error::Error;
};

// Operation issued against a state that cannot serve it (empty labeling, ...).
struct StateError : Error {
    using Error::Error;
};

// Input failed a contract check (non-unit rows, bad config keys, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Malformed dataset or config text; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

// Checkpoint file could not be loaded; `kind` distinguishes failure modes.
struct CheckpointError : Error {
    enum class Kind {
        BadMagic,
        BadVersion,
        Truncated,
        BadBase64,
        LengthMismatch,
        ShapeMismatch,
        BadChecksum,
        Malformed,
    };

    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}

    Kind kind;
};

// Evaluation cannot produce a result (zero valid queries).
struct EvalError : Error {
    using Error::Error;
};

// Referenced file missing or unreadable; message names the path.
struct FileError : Error {
    using Error::Error;
};

}  // namespace gcmt
