#pragma once

#include <stdexcept>
#include <string>

namespace dispat {

// Exception taxonomy shared by all modules. Every throw site uses one of
// these so callers (and the CLI) can report the failing subsystem by name.

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyPoolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ForwardReferenceError : ParseError {
    using ParseError::ParseError;
};

struct EmptyPatentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DuplicateIdError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotIndexedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingEmbeddingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidClaimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyReferenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dispat
