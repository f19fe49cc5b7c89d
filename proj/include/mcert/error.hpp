#ifndef MCERT_ERROR_HPP
#define MCERT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mcert {

/// Invalid configuration or violated precondition. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Quadrature, refinement or simulation failure. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string &what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}

  /// Achieved tolerance (or the offending value) when meaningful.
  double achieved() const noexcept { return achieved_; }

private:
  double achieved_;
};

/// beta_bar >= 1 or another constant outside its admissible range.
class CertificateInvalid : public NumericalError {
public:
  explicit CertificateInvalid(const std::string &what, double minimal_R = 0.0)
      : NumericalError(what, minimal_R) {}

  double minimal_R() const noexcept { return achieved(); }
};

/// An integral that does not converge against the proposal density.
class DivergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// M q(x) < h(x) at a proposal point of the rejection sampler.
class EnvelopeError : public ConfigError {
public:
  EnvelopeError(const std::string &what, double x)
      : ConfigError(what), x_(x) {}

  double violating_x() const noexcept { return x_; }

private:
  double x_;
};

/// Regenerative sampler could not leave the atom.
class StallError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace mcert

#endif
