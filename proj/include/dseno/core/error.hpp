#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dseno {

/// Error categories. The CLI maps each category onto its exit code.
enum class Errc {
    shape_mismatch,
    even_kernel,
    bad_dilation,
    dtype_mismatch,
    invalid_config,
    unknown_name,
    io_failure,
    corrupt_file,
    data_mismatch,
    non_finite,
    divergence,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Invalid model, layer or run configuration (exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
    explicit ConfigError(const std::string& message) : Error(Errc::invalid_config, message) {}
};

/// Unreadable, corrupt or inconsistent data files (exit code 2).
class DataError : public Error {
public:
    using Error::Error;
    explicit DataError(const std::string& message) : Error(Errc::data_mismatch, message) {}
};

/// NaN/Inf in a forward or backward result, or a diverging loss (exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
    explicit NumericError(const std::string& message) : Error(Errc::non_finite, message) {}
};

}  // namespace dseno
