#pragma once

#include <stdexcept>
#include <string>

namespace crep {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed network or configuration document.
class ParseError : public Error {
  public:
    using Error::Error;
};

/// A network or decision spec violates one of its invariants.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Argument outside the domain of a probability or closed-form routine.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// No synchronous state inside the phase-security domain could be found.
class NoSynchronousStateError : public Error {
  public:
    enum class Reason { no_convergence, out_of_domain };

    NoSynchronousStateError(Reason reason, const std::string& what)
        : Error("no admissible synchronous state: " + what), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

  private:
    Reason reason_;
};

/// The synchronous state is (numerically) marginally stable: lambda_2 ~ 0.
class DegenerateError : public Error {
  public:
    using Error::Error;
};

/// A dense linear-algebra step lost accuracy (e.g. Lyapunov residual too large).
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Every Monte-Carlo trajectory reached the horizon without exiting.
class AllCensoredError : public Error {
  public:
    using Error::Error;
};

/// The decision spec admits no point (budget outside the box sums).
class InfeasibleSpecError : public Error {
  public:
    using Error::Error;
};

/// The search never evaluated a candidate with an admissible synchronous state.
class NoFeasiblePointError : public Error {
  public:
    using Error::Error;
};

}  // namespace crep
