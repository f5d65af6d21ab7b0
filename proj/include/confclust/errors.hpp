#pragma once

#include <stdexcept>
#include <string>

namespace confclust {

/// Precondition or input-validation failure.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values or other floating-point breakdown during a computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mixture component collapsed (vanishing weight or singular dispersion).
class DegenerateFit : public std::runtime_error {
public:
    DegenerateFit(const std::string& what, int iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

class UnsupportedSize : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Too many replications of a diagnostic failed to produce a usable fit.
class DiagnosticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside one stage of a conformal pipeline fit; carries the stage name.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace confclust
