/// @file errors.hpp
/// @brief Error codes and the exception type shared by every rec module.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rec {

enum class ErrorCode {
    BadJson,
    MissingField,
    WrongType,
    ModeMismatch,
    EmptyRequired,
    DuplicateContextId,
    UnknownContextId,
    NotFound,
    ClaimNotFound,
    HaluGold,
    LengthMismatch,
    Empty,
    InvalidArgument,
    MissingSlot,
    Io,
    Transport,
    AuthFailure,
    BackendRefusal,
    Truncated,
    Cancelled,
};

std::string_view to_string(ErrorCode code);

class RecError : public std::runtime_error {
public:
    RecError(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace rec
