#pragma once

#include <stdexcept>
#include <string>

namespace leadq {

// Error classes used across the simulator. The CLI maps each class to a
// distinct nonzero exit code and prints the class name with the message.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class PartitionError : public std::runtime_error {
 public:
  explicit PartitionError(const std::string& msg) : std::runtime_error(msg) {}
};

class BudgetError : public std::runtime_error {
 public:
  explicit BudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a hidden label is read without a logged oracle query.
class AuditViolation : public std::runtime_error {
 public:
  explicit AuditViolation(const std::string& msg) : std::runtime_error(msg) {}
};

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace leadq
