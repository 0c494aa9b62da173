#pragma once

#include <stdexcept>
#include <string>

namespace meerkit {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Config = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
    InvalidArgument = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::Data, msg); }
inline Error numerical_error(const std::string& msg) { return Error(ErrorKind::Numerical, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::Io, msg); }
inline Error invalid_argument(const std::string& msg) { return Error(ErrorKind::InvalidArgument, msg); }

}  // namespace meerkit
