#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace csdis {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can map a failure category onto an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SpecError : public ConfigError {
public:
    SpecError(std::size_t layer, const std::string& what)
        : ConfigError("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// A representation that is constant across samples has no defined distance
// correlation; the same error covers zero-variance Pearson inputs.
class DegenerateInput : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FormatError : public Error {
public:
    FormatError(std::uint64_t offset, const std::string& what)
        : Error("at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace csdis
