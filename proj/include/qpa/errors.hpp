#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qpa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& message)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Malformed object, violated precondition, or invalid argument.
class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& message) : Error(message) {}
};

class EvalError : public Error {
 public:
  explicit EvalError(const std::string& message) : Error(message) {}
};

/// A configured resource budget (decisions, time, paths, output size) was exceeded.
/// Never a wrong answer: the computation is abandoned.
class BudgetError : public Error {
 public:
  explicit BudgetError(const std::string& message) : Error(message) {}
};

/// A branch condition reads state written inside an earlier conditional.
class UnsupportedStructure : public StructuralError {
 public:
  UnsupportedStructure(std::size_t branch, std::string variable, const std::string& message)
      : StructuralError(message), branch_(branch), variable_(std::move(variable)) {}

  std::size_t branch() const { return branch_; }
  const std::string& variable() const { return variable_; }

 private:
  std::size_t branch_;
  std::string variable_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(message) {}
};

}  // namespace qpa
