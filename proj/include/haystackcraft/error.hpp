#pragma once

#include <stdexcept>
#include <string>

namespace hc {

enum class ErrorCode {
    InvalidArgument,
    Parse,
    Ingest,
    Validation,
    Io,
    Transport,
    EmptyQuery,
};

/// Every failure raised by the library carries a code so the C boundary can
/// translate it into a status value without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace hc
