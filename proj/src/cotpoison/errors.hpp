#pragma once

#include <stdexcept>
#include <string>

namespace cotpoison {

// Error categories line up with CLI exit codes and C API status values:
// generic = 1, config = 2, transport = 3.
enum class ErrorCode { Generic = 1, Config = 2, Transport = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Malformed files, invalid arguments, broken invariants.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

// Network or HTTP failure that survived the retry policy.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what) : Error(ErrorCode::Transport, what) {}
};

// Replay provider has no recorded response for the requested key.
class FixtureMissError : public Error {
public:
    explicit FixtureMissError(const std::string& what) : Error(ErrorCode::Generic, what) {}
};

} // namespace cotpoison
