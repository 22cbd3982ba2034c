#pragma once

#include <stdexcept>
#include <string>

namespace ionkink {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two ions coincide, or a coordinate is not finite.
class DegenerateConfigurationError : public Error {
public:
    using Error::Error;
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

/// Relaxation did not reach the requested force tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double final_gradient_norm)
        : Error(what), final_gradient_norm_(final_gradient_norm) {}
    double final_gradient_norm() const noexcept { return final_gradient_norm_; }

private:
    double final_gradient_norm_;
};

/// The kink annihilated while relaxing or continuing along alpha.
class KinkLostError : public Error {
public:
    KinkLostError(const std::string& what, double alpha) : Error(what), alpha_(alpha) {}
    double alpha() const noexcept { return alpha_; }

private:
    double alpha_;
};

/// A state that should be an equilibrium carries residual forces.
class StaleStateError : public Error {
public:
    using Error::Error;
};

class BracketError : public Error {
public:
    using Error::Error;
};

/// Hessian has a negative eigenvalue below the numerical floor.
class SaddleError : public Error {
public:
    using Error::Error;
};

class NoDefectError : public Error {
public:
    using Error::Error;
};

class LocalInstabilityError : public Error {
public:
    using Error::Error;
};

/// Inputs that should belong together (spectrum and equilibrium) do not.
class InconsistencyError : public Error {
public:
    using Error::Error;
};

/// Molecular dynamics energy drift exceeded the accepted bound.
class IntegrationQualityError : public Error {
public:
    IntegrationQualityError(const std::string& what, double drift) : Error(what), drift_(drift) {}
    double drift() const noexcept { return drift_; }

private:
    double drift_;
};

class UndefinedRatioError : public Error {
public:
    using Error::Error;
};

/// Aspect ratio outside the range where the two-row crystal is meaningful.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Malformed command line, configuration file or input file.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace ionkink
