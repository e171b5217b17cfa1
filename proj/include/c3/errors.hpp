#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace c3 {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated shape or dimension contract between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input outside an operation's documented domain (non-normalized rows,
// invalid probability vectors, non-finite values, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DegenerateRowError : public ContractError {
 public:
  explicit DegenerateRowError(std::size_t row)
      : ContractError("row " + std::to_string(row) + " has zero norm"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Hyperparameter or configuration value out of range. The message names the field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace c3
