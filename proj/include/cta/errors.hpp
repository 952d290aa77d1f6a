#pragma once

#include <stdexcept>
#include <string>

namespace cta {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed input file; message carries path and 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line) : Error(msg), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Numerical blow-up during a solve or training run.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, double where) : Error(msg), where_(where) {}
    double where() const { return where_; }  // solve time or iteration index

private:
    double where_;
};

// Bad or missing configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace cta
