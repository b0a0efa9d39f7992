#pragma once

#include <stdexcept>
#include <string>

namespace timeloop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chart point lies outside the model's coordinate domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, deck label, tolerance or other configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by its inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Integration stopped early. `last_valid()` is the last parameter value
/// that was reached with a valid state.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_valid, bool chart_exit = false)
      : Error(what), last_valid_(last_valid), chart_exit_(chart_exit) {}
  double last_valid() const noexcept { return last_valid_; }
  bool chart_exit() const noexcept { return chart_exit_; }

 private:
  double last_valid_;
  bool chart_exit_;
};

/// Newton inversion of an exponential map did not converge along a window.
class InversionFailure : public Error {
 public:
  using Error::Error;
};

/// A hill-climb step changed the length by less than the stall tolerance.
class DegenerateStep : public Error {
 public:
  DegenerateStep(const std::string& what, double length_change)
      : Error(what), length_change_(length_change) {}
  double length_change() const noexcept { return length_change_; }

 private:
  double length_change_;
};

}  // namespace timeloop
