#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vidplan {

enum class ErrorCode {
  UnknownOperator,
  MissingProfilePoint,
  ParseError,
  DomainMismatch,
  NoAdequatePoint,
  Infeasible,
  BudgetInfeasible,
  DomainError,
  TooLarge,
  EmptyFeasibleSet,
  WeightViolation,
  ScenarioInvalid,
  MappingError,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownOperator: return "UnknownOperator";
    case ErrorCode::MissingProfilePoint: return "MissingProfilePoint";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::NoAdequatePoint: return "NoAdequatePoint";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::BudgetInfeasible: return "BudgetInfeasible";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::EmptyFeasibleSet: return "EmptyFeasibleSet";
    case ErrorCode::WeightViolation: return "WeightViolation";
    case ErrorCode::ScenarioInvalid: return "ScenarioInvalid";
    case ErrorCode::MappingError: return "MappingError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every planner failure surfaces as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vidplan
