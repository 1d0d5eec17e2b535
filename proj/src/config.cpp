#include "mailform/config.hpp"

#include "mailform/errors.hpp"
#include "mailform/util.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>

namespace mailform::cfg {

using nlohmann::json;

Config Config::from_json_text(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::Config, "config is not a JSON object");

    Config config;
    auto path_of = [&](const char* key) -> std::filesystem::path {
        return parsed.contains(key) ? std::filesystem::path(parsed[key].get<std::string>())
                                    : std::filesystem::path();
    };
    config.inbox_dir = path_of("inbox_dir");
    config.outbox_dir = path_of("outbox_dir");
    config.fixtures_dir = path_of("fixtures_dir");
    config.ledger_path = path_of("ledger_path");
    config.cursor_path = path_of("cursor_path");
    if (config.cursor_path.empty() && !config.ledger_path.empty())
        config.cursor_path = config.ledger_path.parent_path() / "cursor.json";

    if (parsed.contains("ocr")) {
        const json& ocr = parsed["ocr"];
        config.ocr.backend = ocr.value("backend", config.ocr.backend);
        config.ocr.base_url = ocr.value("base_url", config.ocr.base_url);
    }
    if (parsed.contains("llm")) {
        const json& llm = parsed["llm"];
        config.llm.backend = llm.value("backend", config.llm.backend);
        config.llm.base_url = llm.value("base_url", config.llm.base_url);
        config.llm.model = llm.value("model", config.llm.model);
        config.llm.temperature = llm.value("temperature", config.llm.temperature);
        config.llm.script_path = llm.value("script_path", config.llm.script_path);
    }
    config.min_confidence = parsed.value("min_confidence", config.min_confidence);
    config.poll_interval_s = parsed.value("poll_interval_s", config.poll_interval_s);
    if (parsed.contains("retry")) {
        const json& retry = parsed["retry"];
        config.retry.budget = retry.value("budget", config.retry.budget);
        config.retry.backoff_base_s = retry.value("backoff_base_s", config.retry.backoff_base_s);
        config.retry.backoff_factor = retry.value("backoff_factor", config.retry.backoff_factor);
    }
    config.reply_from = parsed.value("reply_from", config.reply_from);

    if (config.ocr.backend != "stub" && config.ocr.backend != "remote")
        throw Error::permanent(ErrorKind::Config, "ocr.backend must be 'stub' or 'remote'");
    if (config.llm.backend != "mock" && config.llm.backend != "remote")
        throw Error::permanent(ErrorKind::Config, "llm.backend must be 'mock' or 'remote'");
    if (config.min_confidence < 0.0 || config.min_confidence > 1.0)
        throw Error::permanent(ErrorKind::Config, "min_confidence must be within [0,1]");
    if (config.retry.budget < 1)
        throw Error::permanent(ErrorKind::Config, "retry.budget must be at least 1");
    return config;
}

Config Config::load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const Error&) {
        throw Error::permanent(ErrorKind::Config, "cannot read config file " + path.string());
    }
    try {
        return from_json_text(text);
    } catch (const Error& e) {
        throw Error::permanent(ErrorKind::Config, path.string() + ": " + e.what());
    }
}

std::string Config::to_json_text() const {
    json out{
        {"inbox_dir", inbox_dir.string()},
        {"outbox_dir", outbox_dir.string()},
        {"fixtures_dir", fixtures_dir.string()},
        {"ledger_path", ledger_path.string()},
        {"cursor_path", cursor_path.string()},
        {"ocr", {{"backend", ocr.backend}, {"base_url", ocr.base_url}}},
        {"llm",
         {{"backend", llm.backend},
          {"base_url", llm.base_url},
          {"model", llm.model},
          {"temperature", llm.temperature},
          {"script_path", llm.script_path}}},
        {"min_confidence", min_confidence},
        {"poll_interval_s", poll_interval_s},
        {"retry",
         {{"budget", retry.budget},
          {"backoff_base_s", retry.backoff_base_s},
          {"backoff_factor", retry.backoff_factor}}},
        {"reply_from", reply_from},
    };
    return out.dump(2) + "\n";
}

std::filesystem::path resolve_config_path(const std::optional<std::string>& cli_flag) {
    if (cli_flag && !cli_flag->empty())
        return *cli_flag;
    if (const char* env = std::getenv("MAILFORM_CONFIG"); env && *env)
        return env;
    std::filesystem::path fallback = "mailform.json";
    std::error_code ec;
    if (std::filesystem::exists(fallback, ec))
        return fallback;
    throw Error::permanent(ErrorKind::Config,
                           "no config given: pass --config, set MAILFORM_CONFIG, or provide ./mailform.json");
}

std::string llm_token_from_env() {
    const char* env = std::getenv("MAILFORM_LLM_TOKEN");
    return env ? env : "";
}

std::string ocr_token_from_env() {
    const char* env = std::getenv("MAILFORM_OCR_TOKEN");
    return env ? env : "";
}

} // namespace mailform::cfg
