#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prioheap {

// Base for every recoverable error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfMemory : public Error {
 public:
  using Error::Error;
};

// A slot write whose target has already been swept.
class DanglingWrite : public Error {
 public:
  using Error::Error;
};

// A priority reference, size query or cache value pointing at a swept object.
class DanglingReferent : public Error {
 public:
  using Error::Error;
};

class InvalidBound : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace prioheap
