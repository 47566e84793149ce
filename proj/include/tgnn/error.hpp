#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tgnn {

// Base of every error raised by the library. The CLI maps the category to
// an exit code.
class Error : public std::runtime_error {
public:
    enum class Kind { parse, dimension, reference, contract, shape, numeric, io };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(Kind::parse, source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(Kind::dimension, what) {}
};

class ReferenceError : public Error {
public:
    explicit ReferenceError(const std::string& what) : Error(Kind::reference, what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(Kind::contract, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(Kind::shape, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(Kind::numeric, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Kind::io, what) {}
};

} // namespace tgnn
