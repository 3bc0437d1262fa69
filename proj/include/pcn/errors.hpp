#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A value went non-finite. `layer()` is -1 when no layer applies.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long layer = -1)
        : Error(what), layer_(layer) {}
    long layer() const noexcept { return layer_; }

private:
    long layer_;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// A worker task failed inside the layer-parallel engine.
class EngineError : public Error {
public:
    EngineError(const std::string& what, std::size_t layer)
        : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

class AuditError : public Error {
public:
    using Error::Error;
};

}  // namespace pcn
