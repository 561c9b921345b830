#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sga {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Bad caller-supplied parameters (fractions, budgets, sizes, config values).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingEdge : public Error {
 public:
  MissingEdge(int u, int v)
      : Error("no edge between " + std::to_string(u) + " and " + std::to_string(v)) {}
};

// A metric that is not defined on the given graph (no triads, zero variance, one class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace sga
