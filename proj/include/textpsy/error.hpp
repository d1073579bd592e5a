#pragma once

#include <stdexcept>
#include <string>

namespace textpsy {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Config = 1,
    Data = 2,
    Backend = 3,
    Numerical = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct BackendError : Error {
    explicit BackendError(const std::string& what) : Error(ErrorKind::Backend, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

// Parallel analysis on the first-order factor correlations found no factor.
struct NoSecondOrderStructure : NumericalError {
    NoSecondOrderStructure() : NumericalError("no second-order structure") {}
};

}  // namespace textpsy
