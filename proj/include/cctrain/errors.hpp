#pragma once

#include <stdexcept>
#include <string>

namespace cctrain {

// Base for everything thrown by the library. The CLI maps ConfigError to
// exit code 1 and the rest to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// CSV header or row does not follow the file contract.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& msg) : Error("schema error: " + msg) {}
};

// Structurally well-formed input whose content violates an invariant
// (t gaps, ragged rows, inconsistent labels within a series).
class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& msg) : Error("integrity error: " + msg) {}
};

// Value outside its declared domain (e.g. label >= class_count).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

// Invalid synthetic-dataset specification.
class SpecError : public Error {
public:
    explicit SpecError(const std::string& msg) : Error("spec error: " + msg) {}
};

// Non-finite value produced during a model pass; carries the 1-based
// time step at which it was detected.
class NumericError : public Error {
public:
    NumericError(const std::string& msg, int step)
        : Error("numeric error at step " + std::to_string(step) + ": " + msg), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

// A function was called outside its contract (missing table entry, K < 2, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error("contract error: " + msg) {}
};

// Invalid run configuration; message carries the offending field path.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// A metric is undefined on the given inputs (e.g. single-class AUC).
class MetricError : public Error {
public:
    explicit MetricError(const std::string& msg) : Error("metric error: " + msg) {}
};

// Scheduler reached an invalid state; carries the 1-based stage index.
class SchedulingError : public Error {
public:
    SchedulingError(const std::string& msg, int stage)
        : Error("scheduling error at stage " + std::to_string(stage) + ": " + msg), stage_(stage) {}
    int stage() const { return stage_; }

private:
    int stage_;
};

}  // namespace cctrain
