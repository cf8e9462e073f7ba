#pragma once

#include <stdexcept>
#include <string>

namespace eponq {

// Categories double as process exit codes in the CLI.
enum class ErrorCategory : int {
    config = 2,
    validation = 3,
    numerical = 4,
    saturation = 5,
    model_validity = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Invalid input document or parameter set. `field` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(ErrorCategory::config, field.empty() ? what : field + ": " + what),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Offered load or window limit leaves the queue without a stationary regime.
class SaturationError : public Error {
public:
    explicit SaturationError(const std::string& what) : Error(ErrorCategory::saturation, what) {}
};

/// An iterative solver did not reach its tolerance. `residual` is the worst one seen.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual)
        : Error(ErrorCategory::numerical, what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The solved boundary probabilities are not a probability distribution.
class ModelValidityError : public Error {
public:
    explicit ModelValidityError(const std::string& what)
        : Error(ErrorCategory::model_validity, what) {}
};

}  // namespace eponq
