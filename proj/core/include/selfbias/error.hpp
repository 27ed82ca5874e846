#pragma once

#include <stdexcept>
#include <string>

namespace selfbias {

// Base of every error raised by the library. Subclasses tag the failure
// domain so callers (the CLI, the pipeline) can decide what is recoverable.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: schema violations, non-finite scores, empty sample sets.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A scripted or replay provider has no entry for the requested key.
class ScenarioError : public Error {
public:
    using Error::Error;
};

// Remote provider failed after exhausting retries, or returned a
// non-retryable status.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status = 0)
        : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

// Prompt rendering failed (missing slot, unknown template).
class TemplateError : public Error {
public:
    using Error::Error;
};

}  // namespace selfbias
