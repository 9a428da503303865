#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

// Error taxonomy shared across the library. Every throwing path uses one of
// these so callers (and the CLI) can report the failing subsystem by type.

struct ConvergenceFailure : std::runtime_error {
    explicit ConvergenceFailure(const std::string& what) : std::runtime_error(what) {}
};

struct BoundViolation : std::runtime_error {
    explicit BoundViolation(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureFailure : std::runtime_error {
    explicit QuadratureFailure(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidExponent : std::invalid_argument {
    explicit InvalidExponent(const std::string& what) : std::invalid_argument(what) {}
};

struct StencilFailure : std::runtime_error {
    explicit StencilFailure(const std::string& what) : std::runtime_error(what) {}
};

struct NoContraction : std::runtime_error {
    explicit NoContraction(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergence : std::runtime_error {
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct UnboundedDrift : std::invalid_argument {
    explicit UnboundedDrift(const std::string& what) : std::invalid_argument(what) {}
};

struct StepRejection : std::runtime_error {
    StepRejection(const std::string& what, double suggested) : std::runtime_error(what), suggested_dt(suggested) {}
    double suggested_dt;
};

struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct ModuleError : std::runtime_error {
    ModuleError(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_name(module) {}
    std::string module_name;
};

struct MissingArtifact : std::runtime_error {
    explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fraclab
