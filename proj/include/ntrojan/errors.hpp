#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ntrojan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A trojan configuration, pair list or other argument failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Gradient descent produced a non-finite loss.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

enum class ParseErrorCode {
    BadMagic,
    UnsupportedVersion,
    Truncated,
    BadRecord,
    OutOfBounds,
    OverlappingRegions,
    NonCanonicalLayout,
    DimensionMismatch,
    NonFiniteValue,
    EmptyModel,
    BadText,
};

const char* to_string(ParseErrorCode code);

/// Malformed model, dataset, patch or manifest input.
///
/// `line()` is non-zero only for the text formats.
class ParseError : public Error {
public:
    ParseError(ParseErrorCode code, const std::string& what, std::size_t line = 0)
        : Error(std::string(to_string(code)) + ": " + what), code_(code), line_(line) {}

    ParseErrorCode code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    ParseErrorCode code_;
    std::size_t line_;
};

/// A patch edit did not find its expected bytes in the target.
class PatchMismatchError : public Error {
public:
    PatchMismatchError(std::uint64_t offset, const std::string& what)
        : Error(what), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace ntrojan
