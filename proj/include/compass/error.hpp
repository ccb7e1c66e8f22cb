#pragma once

#include <stdexcept>
#include <string>

namespace compass {

enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3 };

/// Base exception; the kind maps onto CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond)
        throw DataError(msg);
}

} // namespace compass
