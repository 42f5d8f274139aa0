#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maskforge {

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    degenerate_geometry,
    empty_mask,
    missing_region,
    io,
    decode,
    not_found,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code() to map
// failures to exit codes or HTTP statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace maskforge
