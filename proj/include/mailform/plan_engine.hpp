#pragma once

#include "mailform/form_model.hpp"

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mailform::plan {

// The planner's total assignment: every schema field resolves to a string
// value or an explicit intentional blank (std::nullopt).
struct CompletionPlan {
    form::FieldValues entries;
    std::vector<std::string> warnings;
    std::string model_name;
    double elapsed_s = 0;

    std::vector<std::string> blank_fields() const;
    std::vector<std::string> value_fields() const;
};

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    std::string schema_digest; // form::schema_digest of the governing schema
};

// Chat-completion abstraction. Implementations may throw retryable
// Error(Backend) on transport trouble.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string model_name() const = 0;
    virtual std::string complete(const PromptBundle& bundle) = 0;
};

// Deterministic stand-in for a model. Scripted responses are keyed by schema
// digest and consumed in order; an entry may be a canned reply or an injected
// transport failure. Without a script entry the backend falls back to a
// rule-based mapper that copies context lines of the form "KEY: value" into
// same-named fields and leaves the rest null.
class MockLlmBackend : public LlmBackend {
public:
    struct ScriptEntry {
        std::string text;
        bool fail = false; // throw a retryable backend error instead
    };
    using Script = std::map<std::string, std::deque<ScriptEntry>>;

    MockLlmBackend() = default;
    explicit MockLlmBackend(Script script) : script_(std::move(script)) {}

    // Loads a script file: {"<schema_digest>": [{"text": "..."} | {"fail": true}, ...]}
    static MockLlmBackend from_file(const std::string& path);

    std::string model_name() const override { return "mock"; }
    std::string complete(const PromptBundle& bundle) override;

private:
    Script script_;
};

// Generic chat-completions HTTP client:
// POST <base_url>/v1/chat/completions, bearer auth from the environment,
// response text taken from choices[0].message.content.
class RemoteLlmBackend : public LlmBackend {
public:
    RemoteLlmBackend(std::string base_url, std::string model, double temperature,
                     std::string auth_token);
    std::string model_name() const override { return model_; }
    std::string complete(const PromptBundle& bundle) override;

private:
    std::string base_url_;
    std::string model_;
    double temperature_;
    std::string auth_token_;
};

// Deterministic prompt construction: instruction section, context section
// (render_context output verbatim), one field-list line per schema field,
// and the JSON output directive. Throws Error(Config) on an empty schema.
PromptBundle build_prompt(const std::string& instruction, const form::FormSchema& schema,
                          const std::string& context);

// One model call, wall-clock timed. Returns the backend's text verbatim.
struct PlanResponse {
    std::string raw;
    double elapsed_s = 0;
};
PlanResponse request_plan(const PromptBundle& bundle, LlmBackend& backend);

// Parses the model reply: takes the first balanced top-level JSON object
// (prose and code fences around it are tolerated), maps strings to values
// and null to intentional blanks, drops unknown keys into warnings, and
// fills schema fields missing from the reply as blanks with a warning.
// Throws Error(PlanParse) when no JSON object can be extracted.
CompletionPlan parse_plan(const std::string& raw, const form::FormSchema& schema);

// The single corrective re-prompt: the original bundle plus an appended
// section quoting the unparseable reply. Deterministic.
PromptBundle repair_request(const PromptBundle& bundle, const std::string& raw,
                            const std::string& error_message);

// First balanced top-level {...} in `text`, string-escape aware; empty when
// there is none. Exposed for tests.
std::string extract_json_object(const std::string& text);

} // namespace mailform::plan
