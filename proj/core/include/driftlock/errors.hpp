// Error taxonomy shared by all driftlock modules.
//
// Three kinds map onto the CLI exit-code classes: Config (bad parameters or
// schema), Input (malformed or missing data files), Numeric (fits or training
// that fail at runtime).
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace driftlock {

enum class ErrorKind { Config, Input, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

/// Out-of-range or non-finite parameter.
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Requested band content not representable on the sample grid.
class NyquistError : public ParameterError {
public:
    explicit NyquistError(const std::string& what) : ParameterError(what) {}
};

/// Malformed file content; message carries the offending row where known.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// Input series too short for the requested operation.
class SizeError : public Error {
public:
    explicit SizeError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// Trace does not span the wall-clock interval an operation needs.
class CoverageError : public Error {
public:
    explicit CoverageError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// Run configuration failed schema validation; message carries the field path.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Model weights inconsistent with the declared architecture.
class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Nonlinear fit failed; carries the last iterate for diagnosis.
class FitError : public Error {
public:
    FitError(const std::string& what, std::vector<double> last_params = {})
        : Error(ErrorKind::Numeric, what), last_params_(std::move(last_params)) {}
    const std::vector<double>& last_params() const { return last_params_; }

private:
    std::vector<double> last_params_;
};

/// Fit collapsed to a shape the model cannot represent meaningfully.
class DegenerateFitError : public FitError {
public:
    DegenerateFitError(const std::string& what, std::vector<double> last_params = {})
        : FitError(what, std::move(last_params)) {}
};

/// Efficiency of an identically-zero reference trace is undefined.
class UndefinedEfficiencyError : public Error {
public:
    explicit UndefinedEfficiencyError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

} // namespace driftlock
