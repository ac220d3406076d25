#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oscil {

enum class ErrorKind {
  SingularMatrix,
  DimensionMismatch,
  NotSymmetric,
  NoConvergence,
  Overflow,
  NonFiniteEvaluation,
  ModulusOutOfRange,
  SingularA,
  AssertionFailure,
  UnknownProblem,
  UnknownMethod,
  UnknownTable,
  UnknownFigure,
  SolverDiverged,
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::ModulusOutOfRange: return "ModulusOutOfRange";
    case ErrorKind::SingularA: return "SingularA";
    case ErrorKind::AssertionFailure: return "AssertionFailure";
    case ErrorKind::UnknownProblem: return "UnknownProblem";
    case ErrorKind::UnknownMethod: return "UnknownMethod";
    case ErrorKind::UnknownTable: return "UnknownTable";
    case ErrorKind::UnknownFigure: return "UnknownFigure";
    case ErrorKind::SolverDiverged: return "SolverDiverged";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the step drivers; carries the index of the failing step.
class StepFailure : public Error {
 public:
  StepFailure(ErrorKind kind, std::size_t step, const std::string& what)
      : Error(kind, what + " (step " + std::to_string(step) + ")"), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace oscil
