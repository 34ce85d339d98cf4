#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvgc {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class shape_error : public error {
public:
    using error::error;
};

/// Argument outside the mathematical domain of an operation.
class domain_error : public error {
public:
    using error::error;
};

/// A computation produced NaN or Inf.
class numeric_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

/// Malformed dataset file. Carries the file and 1-based line when known.
class parse_error : public error {
public:
    parse_error(const std::string& file, std::size_t line, const std::string& what)
        : error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class encoding_error : public error {
public:
    using error::error;
};

class split_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

}  // namespace mvgc
