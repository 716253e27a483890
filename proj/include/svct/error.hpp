#pragma once

#include <stdexcept>
#include <string>

namespace svct {

/// Base exception for every failure raised by the library. Messages are a
/// single line so the CLI can forward them verbatim.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace svct
