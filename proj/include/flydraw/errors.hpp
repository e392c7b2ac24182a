#pragma once

#include <stdexcept>
#include <string>

namespace flydraw {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Tilt guard or non-finite state during integration.
class SimulationDiverged : public Error {
public:
  SimulationDiverged(const std::string& what, long step = -1)
      : Error(what), step_(step) {}
  long step() const { return step_; }

private:
  long step_;
};

// Wrong vector/matrix dimensions.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Corrupt, truncated, or version-mismatched file.
class FormatError : public Error {
public:
  using Error::Error;
};

// Missing or inconsistent configuration (missing bundle, missing stats).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Caller supplied something that fails validation (degenerate path, bad factor).
class InvalidInput : public Error {
public:
  using Error::Error;
};

// Non-finite loss during training.
class TrainingDiverged : public Error {
public:
  TrainingDiverged(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

private:
  int iteration_;
};

class NotFound : public Error {
public:
  using Error::Error;
};

// A training pipeline stage ("collect", "build-pairs", "train", ...) failed.
class PipelineFailure : public Error {
public:
  PipelineFailure(const std::string& stage, const std::string& what)
      : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

}  // namespace flydraw
