#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gcmi {

enum class ErrorKind {
    invalid_argument,
    shape,
    numeric,
    domain,
    insufficient_data,
    unimputable_column,
    undefined_point,
    undefined_metric,
    insufficient_imputations,
    parse,
    empty_input,
    ingestion,
    config,
    io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, std::string_view message) {
    if (!condition) fail(kind, std::string(message));
}

} // namespace gcmi
