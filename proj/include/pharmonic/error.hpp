#pragma once

#include <stdexcept>
#include <string>

namespace pharmonic {

/// Base of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class DegenerateModulus : public Error { using Error::Error; };
class DegenerateCoefficient : public Error { using Error::Error; };
class DomainExit : public Error { using Error::Error; };
class Unsupported : public Error { using Error::Error; };
class Divergence : public Error { using Error::Error; };
class ProjectionUnreliable : public Error { using Error::Error; };
class InsufficientData : public Error { using Error::Error; };
class SingularPoint : public Error { using Error::Error; };

/// Solver failure inside a continuation sweep, tagged with the stage index.
class StageFailure : public Error {
 public:
  StageFailure(std::size_t stage, const std::string& what)
      : Error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

}  // namespace pharmonic
