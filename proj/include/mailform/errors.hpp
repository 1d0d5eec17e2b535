#pragma once

#include <stdexcept>
#include <string>

namespace mailform {

// Where an error came from. Used by the pipeline to decide whether a
// failure is user-addressable and by the CLI to pick an exit code.
enum class ErrorKind {
    Io,         // filesystem / transport trouble
    Parse,      // malformed MIME or JSON input
    Format,     // payload is not what it claims to be (e.g. not a PDF)
    Schema,     // form schema violation (duplicate names, unknown field)
    PlanParse,  // model output could not be turned into a plan
    Scoring,    // gold/observed key mismatch
    Config,     // bad configuration or usage
    Backend,    // OCR / LLM backend failure
    Ledger,     // the append-only ledger could not be written
};

const char* to_string(ErrorKind kind);

// Single exception type for the whole pipeline. `retryable()` separates
// transient failures (worth another attempt after backoff) from permanent
// ones.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, bool retryable)
        : std::runtime_error(std::move(message)), kind_(kind), retryable_(retryable) {}

    static Error retryable(ErrorKind kind, std::string message) {
        return Error(kind, std::move(message), true);
    }
    static Error permanent(ErrorKind kind, std::string message) {
        return Error(kind, std::move(message), false);
    }

    ErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return retryable_; }

private:
    ErrorKind kind_;
    bool retryable_;
};

} // namespace mailform
