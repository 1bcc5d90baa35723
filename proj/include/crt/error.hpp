#pragma once

#include <stdexcept>
#include <string>

namespace crt {

// Every failure in the library surfaces as one of these; the what() string
// carries file/line-number or (observation, repetition, fold) context built
// by the throw site.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace crt
