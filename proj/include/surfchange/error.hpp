#pragma once

#include <stdexcept>
#include <string>

namespace surfchange {

enum class ErrorCode {
    InvalidArgument,
    Io,
    MalformedInput,
    InsufficientData,
    DegenerateGeometry,
    NumericalFailure,
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::MalformedInput: return "malformed input";
    case ErrorCode::InsufficientData: return "insufficient data";
    case ErrorCode::DegenerateGeometry: return "degenerate geometry";
    case ErrorCode::NumericalFailure: return "numerical failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define SURFCHANGE_REQUIRE(cond, code, msg)                        \
    do {                                                           \
        if (!(cond)) throw ::surfchange::Error((code), (msg));     \
    } while (0)

} // namespace surfchange
