#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace mailform::cfg {

struct RetryPolicy {
    int budget = 3;              // attempts per retryable stage
    double backoff_base_s = 1.0; // first delay
    double backoff_factor = 2.0; // exponential growth
};

struct OcrConfig {
    std::string backend = "stub"; // "stub" | "remote"
    std::string base_url;         // remote only
};

struct LlmConfig {
    std::string backend = "mock"; // "mock" | "remote"
    std::string base_url;         // remote only
    std::string model = "mock";
    double temperature = 0.0;
    std::string script_path;      // optional scripted responses for the mock
};

struct Config {
    std::filesystem::path inbox_dir;
    std::filesystem::path outbox_dir;
    std::filesystem::path fixtures_dir; // stub OCR sidecars
    std::filesystem::path ledger_path;
    std::filesystem::path cursor_path;  // defaults next to the ledger
    OcrConfig ocr;
    LlmConfig llm;
    double min_confidence = 0.5;
    double poll_interval_s = 5.0;
    RetryPolicy retry;
    std::string reply_from = "mailform@localhost";

    static Config load(const std::filesystem::path& path);
    static Config from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// CLI flag wins, then MAILFORM_CONFIG, then "mailform.json" in the working
// directory. Throws Error(Config) when nothing exists.
std::filesystem::path resolve_config_path(const std::optional<std::string>& cli_flag);

// Secrets come from the environment, never from the config file.
std::string llm_token_from_env();
std::string ocr_token_from_env();

} // namespace mailform::cfg
