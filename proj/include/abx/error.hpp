#pragma once

#include <stdexcept>
#include <string>

namespace abx {

// Error categories map 1:1 onto process exit codes (see tools/abx_main.cpp).
enum class ErrorKind {
    Config = 2,  // bad configuration or usage
    Io = 3,      // missing/unreadable/unwritable or malformed input files
    Model = 4,   // numerical or model-level failure (rank, convergence, domain)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_model(const std::string& msg) { throw Error(ErrorKind::Model, msg); }

}  // namespace abx
