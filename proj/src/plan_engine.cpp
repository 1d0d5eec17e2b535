#include "mailform/plan_engine.hpp"

#include "mailform/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <set>
#include <sstream>

namespace mailform::plan {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<std::string> CompletionPlan::blank_fields() const {
    std::vector<std::string> out;
    for (const auto& [name, value] : entries)
        if (!value) out.push_back(name);
    return out;
}

std::vector<std::string> CompletionPlan::value_fields() const {
    std::vector<std::string> out;
    for (const auto& [name, value] : entries)
        if (value) out.push_back(name);
    return out;
}

PromptBundle build_prompt(const std::string& instruction, const form::FormSchema& schema,
                          const std::string& context) {
    if (schema.empty())
        throw Error::permanent(ErrorKind::Config, "cannot build a prompt for an empty schema");

    PromptBundle bundle;
    bundle.schema_digest = form::schema_digest(schema);
    bundle.system_text =
        "You complete administrative PDF forms. Use only information found in the "
        "instruction and the context documents. Never invent values.";

    std::string& u = bundle.user_text;
    u += "## Instruction\n";
    u += instruction;
    u += "\n\n## Context documents\n";
    u += context.empty() ? "(none)" : context;
    u += "\n\n## Form fields\n";
    for (const form::FormField& f : schema.fields) {
        u += "- " + f.name + " (";
        u += form::to_string(f.kind);
        if (f.kind == form::FieldKind::Choice)
            u += ": " + util::join(f.options, " | ");
        if (f.kind == form::FieldKind::Text && f.max_len)
            u += ", max " + std::to_string(*f.max_len) + " chars";
        u += ")\n";
    }
    u += "\n## Output format\n";
    u += "Respond with a single JSON object that maps every field name listed above to "
         "either a string value or null. Use null when the provided information is "
         "insufficient to fill that field. Do not leave any field out and do not invent "
         "information.";
    return bundle;
}

std::string extract_json_object(const std::string& text) {
    size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (escaped) {
                escaped = false;
                continue;
            }
            if (c == '\\') {
                escaped = in_string;
                continue;
            }
            if (c == '"') {
                in_string = !in_string;
                continue;
            }
            if (in_string) continue;
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0)
                    return text.substr(start, i - start + 1);
            }
        }
        start = text.find('{', start + 1);
    }
    return "";
}

CompletionPlan parse_plan(const std::string& raw, const form::FormSchema& schema) {
    std::string extracted = extract_json_object(raw);
    if (extracted.empty())
        throw Error::permanent(ErrorKind::PlanParse, "reply contains no JSON object");
    ordered_json parsed = ordered_json::parse(extracted, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::PlanParse, "reply JSON does not parse as an object");

    CompletionPlan plan;
    std::set<std::string> schema_names;
    for (const form::FormField& f : schema.fields) schema_names.insert(f.name);

    std::set<std::string> provided;
    for (const auto& [key, value] : parsed.items()) {
        std::string name = util::normalize_name(key);
        if (!schema_names.count(name)) {
            plan.warnings.push_back("reply mentions unknown field '" + key + "', dropped");
            continue;
        }
        if (provided.count(name)) {
            plan.warnings.push_back("reply repeats field '" + name + "', first value kept");
            continue;
        }
        provided.insert(name);
        if (value.is_null()) {
            plan.entries[name] = std::nullopt;
        } else if (value.is_string()) {
            plan.entries[name] = value.get<std::string>();
        } else {
            // numbers/booleans: usable, but flag the type slip
            plan.entries[name] = value.dump();
            plan.warnings.push_back("field '" + name + "' had a non-string value, stringified");
        }
    }
    for (const std::string& name : schema_names) {
        if (!provided.count(name)) {
            plan.entries[name] = std::nullopt;
            plan.warnings.push_back("field '" + name + "' missing from reply, left blank");
        }
    }
    return plan;
}

PromptBundle repair_request(const PromptBundle& bundle, const std::string& raw,
                            const std::string& error_message) {
    PromptBundle repaired = bundle;
    repaired.user_text +=
        "\n\n## Correction\n"
        "Your previous reply could not be used: " + error_message + "\n"
        "Previous reply was:\n" + raw + "\n"
        "Respond again with exactly one JSON object mapping every listed field name to a "
        "string or null, and nothing else.";
    return repaired;
}

PlanResponse request_plan(const PromptBundle& bundle, LlmBackend& backend) {
    auto start = std::chrono::steady_clock::now();
    PlanResponse response;
    response.raw = backend.complete(bundle);
    response.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return response;
}

// --- mock backend -------------------------------------------------------------

MockLlmBackend MockLlmBackend::from_file(const std::string& path) {
    json parsed = json::parse(util::read_file(path), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::Config, "mock script " + path + " is not a JSON object");
    Script script;
    for (const auto& [digest, entries] : parsed.items()) {
        if (!entries.is_array())
            throw Error::permanent(ErrorKind::Config, "mock script entries must be an array");
        for (const json& e : entries) {
            ScriptEntry entry;
            entry.fail = e.value("fail", false);
            entry.text = e.value("text", "");
            script[digest].push_back(std::move(entry));
        }
    }
    return MockLlmBackend(std::move(script));
}

namespace {

// Pulls the field names back out of the prompt's field-list section.
std::vector<std::string> prompt_field_names(const std::string& user_text) {
    std::vector<std::string> names;
    size_t section = user_text.find("## Form fields\n");
    if (section == std::string::npos) return names;
    size_t pos = section + 15;
    while (pos < user_text.size()) {
        size_t eol = user_text.find('\n', pos);
        std::string line = user_text.substr(pos, eol == std::string::npos ? std::string::npos
                                                                          : eol - pos);
        if (line.rfind("- ", 0) != 0) break;
        size_t paren = line.rfind(" (");
        if (paren != std::string::npos && paren > 2)
            names.push_back(line.substr(2, paren - 2));
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return names;
}

// "KEY: value" lines from the context section, keyed by folded KEY.
std::map<std::string, std::string> prompt_context_pairs(const std::string& user_text) {
    std::map<std::string, std::string> pairs;
    size_t begin = user_text.find("## Context documents\n");
    size_t end = user_text.find("## Form fields\n");
    if (begin == std::string::npos || end == std::string::npos || end <= begin) return pairs;
    std::string section = user_text.substr(begin + 21, end - begin - 21);
    size_t pos = 0;
    while (pos < section.size()) {
        size_t eol = section.find('\n', pos);
        std::string line = section.substr(pos, eol == std::string::npos ? std::string::npos
                                                                        : eol - pos);
        size_t colon = line.find(':');
        if (colon != std::string::npos && colon > 0) {
            std::string key = util::fold_for_match(line.substr(0, colon));
            std::string value = util::collapse_whitespace(line.substr(colon + 1));
            if (!key.empty() && !value.empty() && !pairs.count(key))
                pairs[key] = value;
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return pairs;
}

} // namespace

std::string MockLlmBackend::complete(const PromptBundle& bundle) {
    auto it = script_.find(bundle.schema_digest);
    if (it != script_.end() && !it->second.empty()) {
        ScriptEntry entry = it->second.front();
        it->second.pop_front();
        if (entry.fail)
            throw Error::retryable(ErrorKind::Backend, "mock backend scripted failure");
        return entry.text;
    }

    // Rule-based mapper: copy "KEY: value" context lines into same-named fields.
    std::vector<std::string> names = prompt_field_names(bundle.user_text);
    std::map<std::string, std::string> pairs = prompt_context_pairs(bundle.user_text);
    ordered_json out = ordered_json::object();
    for (const std::string& name : names) {
        auto match = pairs.find(util::fold_for_match(name));
        if (match != pairs.end())
            out[name] = match->second;
        else
            out[name] = nullptr;
    }
    return out.dump(2);
}

// --- remote backend ------------------------------------------------------------

RemoteLlmBackend::RemoteLlmBackend(std::string base_url, std::string model, double temperature,
                                   std::string auth_token)
    : base_url_(std::move(base_url)), model_(std::move(model)), temperature_(temperature),
      auth_token_(std::move(auth_token)) {}

std::string RemoteLlmBackend::complete(const PromptBundle& bundle) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(300);
    httplib::Headers headers;
    if (!auth_token_.empty())
        headers.emplace("Authorization", "Bearer " + auth_token_);

    json body{
        {"model", model_},
        {"messages",
         json::array({
             json{{"role", "system"}, {"content", bundle.system_text}},
             json{{"role", "user"}, {"content", bundle.user_text}},
         })},
        {"temperature", temperature_},
    };
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res)
        throw Error::retryable(ErrorKind::Backend, "LLM backend unreachable at " + base_url_);
    if (res->status < 200 || res->status >= 300)
        throw Error::retryable(ErrorKind::Backend,
                               "LLM backend returned status " + std::to_string(res->status));
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content") ||
        !parsed["choices"][0]["message"]["content"].is_string())
        throw Error::permanent(ErrorKind::Backend, "LLM backend response missing choices[0].message.content");
    return parsed["choices"][0]["message"]["content"].get<std::string>();
}

} // namespace mailform::plan
