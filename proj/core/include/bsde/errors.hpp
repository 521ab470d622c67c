#pragma once

#include <stdexcept>
#include <string>

namespace bsde {

// Base class for all library errors.
class BsdeError : public std::runtime_error {
 public:
  explicit BsdeError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidParameter : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class IndexOutOfRange : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class IllConditionedVolatility : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class SimulationOverflow : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class SingularTangent : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class UnsupportedModel : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class UnsupportedCombination : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class RankDeficientDesign : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class BudgetExceeded : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class MissingReference : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class ReferenceMismatch : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

class DegeneratePoints : public BsdeError {
 public:
  using BsdeError::BsdeError;
};

// Config file problems carry the offending line for diagnostics.
class ConfigError : public BsdeError {
 public:
  ConfigError(const std::string& msg, int line)
      : BsdeError("config:" + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace bsde
