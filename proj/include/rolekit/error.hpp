#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rolekit {

enum class ErrorCode {
    input,
    config,
    transport,
    backend,
    script_miss,
    parse,
    extraction,
    load,
    not_found,
    busy,
    internal,
};

/// Stable machine-readable name, e.g. "E_INPUT". Used by the CLI error
/// prefix and the HTTP error body.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& message) : Error(ErrorCode::input, message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorCode::config, message) {}
};

class TransportError : public Error {
public:
    TransportError(const std::string& message, int attempts)
        : Error(ErrorCode::transport, message), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class BackendError : public Error {
public:
    BackendError(const std::string& message, int status)
        : Error(ErrorCode::backend, message), status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

class ScriptMissError : public Error {
public:
    explicit ScriptMissError(const std::string& message) : Error(ErrorCode::script_miss, message) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw)
        : Error(ErrorCode::parse, message), raw_(std::move(raw)) {}

    const std::string& raw_output() const noexcept { return raw_; }

private:
    std::string raw_;
};

class ExtractionError : public Error {
public:
    ExtractionError(const std::string& message, std::string raw)
        : Error(ErrorCode::extraction, message), raw_(std::move(raw)) {}

    const std::string& raw_output() const noexcept { return raw_; }

private:
    std::string raw_;
};

class LoadError : public Error {
public:
    explicit LoadError(const std::string& message) : Error(ErrorCode::load, message) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& message) : Error(ErrorCode::not_found, message) {}
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& message) : Error(ErrorCode::internal, message) {}
};

} // namespace rolekit
