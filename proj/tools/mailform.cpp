// mailform - turn an inbound email (body = instruction, attachments =
// context + target form) into a completed PDF form returned by reply email.
// Subcommands expose each pipeline stage plus the scoring and cost harness.

#include "mailform/config.hpp"
#include "mailform/doc_extract.hpp"
#include "mailform/errors.hpp"
#include "mailform/eval_harness.hpp"
#include "mailform/form_model.hpp"
#include "mailform/mail_ingest.hpp"
#include "mailform/pipeline.hpp"
#include "mailform/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <csignal>
#include <iostream>

namespace {

using namespace mailform;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;

std::atomic<bool> g_shutdown{false};

void handle_signal(int) { g_shutdown.store(true); }

void install_signal_handlers() {
    struct sigaction sa {};
    sa.sa_handler = handle_signal;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);
}

int exit_code_for(const Error& e) {
    return e.kind() == ErrorKind::Config ? kExitUsage : kExitDomain;
}

cfg::Config load_config(const std::optional<std::string>& flag) {
    return cfg::Config::load(cfg::resolve_config_path(flag));
}

void require_file(const std::string& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        throw Error::permanent(ErrorKind::Config, "file not found: " + path);
}

std::string media_type_from_extension(const std::filesystem::path& path) {
    std::string ext = util::lower_ascii(path.extension().string());
    if (ext == ".pdf") return "application/pdf";
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".tif" || ext == ".tiff") return "image/tiff";
    return "application/octet-stream";
}

int cmd_daemon(const std::optional<std::string>& config_flag) {
    cfg::Config config = load_config(config_flag);
    auto ocr = pipeline::make_ocr_backend(config);
    auto llm = pipeline::make_llm_backend(config);
    reply::OutboxSink sink(config.outbox_dir);
    pipeline::Pipeline pipe(config, *ocr, *llm, sink);
    install_signal_handlers();
    try {
        pipe.run_daemon(g_shutdown);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Ledger) {
            std::cerr << "fatal: " << e.what() << "\n";
            return kExitFatal;
        }
        throw;
    }
    util::log_info("shutdown complete");
    return kExitOk;
}

int cmd_process(const std::string& eml_path, const std::optional<std::string>& config_flag,
                bool as_json) {
    require_file(eml_path);
    cfg::Config config = load_config(config_flag);
    auto ocr = pipeline::make_ocr_backend(config);
    auto llm = pipeline::make_llm_backend(config);
    reply::OutboxSink sink(config.outbox_dir);
    pipeline::Pipeline pipe(config, *ocr, *llm, sink);
    pipe.startup_reconcile();

    ingest::InboundRequest request = ingest::parse_inbound(util::read_file(eml_path));
    pipeline::ProcessingRecord record;
    if (pipe.already_processed(request.message_id))
        record = pipe.record_skip(request.message_id);
    else
        record = pipe.process_request(std::move(request));

    std::cout << record.to_json_line() << "\n";
    (void)as_json; // the record is always a single JSON document
    switch (record.state) {
    case pipeline::State::Replied:
    case pipeline::State::Skipped:
        return kExitOk;
    default:
        return kExitDomain;
    }
}

int cmd_fill(const std::string& pdf_path, const std::string& plan_path,
             const std::string& out_path, bool as_json) {
    require_file(pdf_path);
    require_file(plan_path);
    form::FieldValues values = form::field_values_from_json_text(util::read_file(plan_path));
    form::FilledForm filled = form::fill_form(util::read_file(pdf_path), values);
    util::atomic_write_file(out_path, filled.bytes);

    json summary{
        {"output", out_path},
        {"applied", filled.applied},
        {"skipped", filled.skipped},
        {"notes", filled.notes},
    };
    if (as_json) {
        std::cout << summary.dump(2) << "\n";
    } else {
        std::cout << "wrote " << out_path << ": " << filled.applied.size() << " applied, "
                  << filled.skipped.size() << " skipped\n";
        for (const auto& [name, reason] : filled.skipped)
            std::cout << "  skipped " << name << ": " << reason << "\n";
    }
    return kExitOk;
}

int cmd_schema(const std::string& pdf_path, bool as_json) {
    require_file(pdf_path);
    form::FormSchema schema = form::read_schema(util::read_file(pdf_path));
    if (as_json) {
        std::cout << form::schema_to_json_text(schema) << "\n";
        return kExitOk;
    }
    std::cout << schema.fields.size() << " field(s), digest " << schema.form_digest.substr(0, 12)
              << "\n";
    for (const form::FormField& f : schema.fields) {
        std::cout << "  " << f.name << " (" << form::to_string(f.kind);
        if (f.kind == form::FieldKind::Choice)
            std::cout << ": " << util::join(f.options, " | ");
        if (f.max_len) std::cout << ", max " << *f.max_len;
        std::cout << ") page " << f.page << "\n";
    }
    return kExitOk;
}

int cmd_extract(const std::string& file_path, const std::optional<std::string>& config_flag,
                bool as_json) {
    require_file(file_path);
    cfg::Config config = load_config(config_flag);
    auto backend = pipeline::make_ocr_backend(config);

    ingest::Attachment attachment;
    attachment.filename = std::filesystem::path(file_path).filename().string();
    attachment.media_type = media_type_from_extension(file_path);
    attachment.bytes = util::read_file(file_path);
    extract::ExtractedDocument doc = extract::extract_text(attachment, *backend);
    doc = extract::filter_blocks(doc, config.min_confidence);

    if (as_json) {
        std::cout << extract::extracted_to_json_text(doc) << "\n";
    } else {
        std::cout << doc.blocks.size() << " block(s) via " << doc.backend_name << "\n";
        for (const extract::TextBlock& block : doc.blocks)
            std::cout << "  [" << block.confidence << "] " << block.text << "\n";
    }
    return kExitOk;
}

int cmd_gen_form(const std::string& spec_path, const std::string& out_path) {
    require_file(spec_path);
    std::vector<form::FieldSpec> specs =
        form::field_specs_from_json_text(util::read_file(spec_path));
    Bytes pdf = form::generate_test_form(specs);
    util::atomic_write_file(out_path, pdf);
    std::cout << "wrote " << out_path << " with " << specs.size() << " field(s)\n";
    return kExitOk;
}

form::FormSchema schema_from_path(const std::string& path) {
    require_file(path);
    Bytes data = util::read_file(path);
    if (std::filesystem::path(path).extension() == ".json")
        return form::schema_from_json_text(data);
    return form::read_schema(data);
}

int cmd_eval(const std::string& schema_path, const std::string& gold_path,
             const std::string& runs_dir, bool as_json) {
    require_file(gold_path);
    form::FormSchema schema = schema_from_path(schema_path);
    evalh::GoldKey gold = evalh::GoldKey::load(gold_path);
    auto runs = evalh::load_runs_dir(runs_dir);
    std::vector<evalh::BatchRow> rows = evalh::score_batch(runs, gold, schema);
    if (as_json)
        std::cout << evalh::score_table_json(rows) << "\n";
    else
        std::cout << evalh::render_score_table(rows);
    return kExitOk;
}

int cmd_cost(const evalh::CostParams& params, bool as_json) {
    evalh::CostReport report = evalh::cost_model(params);
    if (as_json)
        std::cout << evalh::cost_report_json(report) << "\n";
    else
        std::cout << evalh::render_cost_report(report);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"email-driven PDF form completion pipeline"};
    app.require_subcommand(1);

    std::optional<std::string> config_flag;
    bool as_json = false;

    auto* daemon = app.add_subcommand("daemon", "watch the inbox and process requests");
    daemon->add_option("--config", config_flag, "config file path");

    std::string eml_path;
    auto* process = app.add_subcommand("process", "process one .eml file end to end");
    process->add_option("eml", eml_path, "message file")->required();
    process->add_option("--config", config_flag, "config file path");
    process->add_flag("--json", as_json, "machine-readable output");

    std::string pdf_path, plan_path, out_path;
    auto* fill = app.add_subcommand("fill", "apply a plan JSON to a form PDF");
    fill->add_option("pdf", pdf_path, "input form PDF")->required();
    fill->add_option("plan", plan_path, "plan JSON (field -> string|null)")->required();
    fill->add_option("out", out_path, "output PDF path")->required();
    fill->add_flag("--json", as_json, "machine-readable output");

    std::string schema_pdf;
    auto* schema = app.add_subcommand("schema", "print the interactive field schema of a PDF");
    schema->add_option("pdf", schema_pdf, "PDF path")->required();
    schema->add_flag("--json", as_json, "machine-readable output");

    std::string extract_path;
    auto* extract_cmd = app.add_subcommand("extract", "run text extraction on one attachment");
    extract_cmd->add_option("file", extract_path, "image or PDF path")->required();
    extract_cmd->add_option("--config", config_flag, "config file path");
    extract_cmd->add_flag("--json", as_json, "machine-readable output");

    std::string spec_path, gen_out;
    auto* gen_form = app.add_subcommand("gen-form", "generate a synthetic interactive form PDF");
    gen_form->add_option("spec", spec_path, "field spec JSON array")->required();
    gen_form->add_option("out", gen_out, "output PDF path")->required();

    std::string eval_schema, eval_gold, eval_runs;
    auto* eval = app.add_subcommand("eval", "score observed plans against a gold key");
    eval->add_option("schema", eval_schema, "form PDF or schema JSON")->required();
    eval->add_option("gold", eval_gold, "gold key JSON")->required();
    eval->add_option("runs", eval_runs, "directory of <label>.json observed plans")->required();
    eval->add_flag("--json", as_json, "machine-readable output");

    evalh::CostParams cost_params;
    auto* cost = app.add_subcommand("cost", "per-form cost model");
    cost->add_option("--annual-salary", cost_params.annual_salary_eur, "gross salary EUR/year");
    cost->add_option("--hours-per-week", cost_params.hours_per_week, "work hours per week");
    cost->add_option("--weeks-per-year", cost_params.weeks_per_year, "work weeks per year");
    cost->add_option("--manual-minutes", cost_params.manual_minutes, "minutes per manual form");
    cost->add_option("--supervision-minutes", cost_params.supervision_minutes,
                     "review minutes per automated form");
    cost->add_option("--cloud-cost", cost_params.cloud_cost_eur, "cloud cost EUR per form");
    cost->add_flag("--json", as_json, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (daemon->parsed()) return cmd_daemon(config_flag);
        if (process->parsed()) return cmd_process(eml_path, config_flag, as_json);
        if (fill->parsed()) return cmd_fill(pdf_path, plan_path, out_path, as_json);
        if (schema->parsed()) return cmd_schema(schema_pdf, as_json);
        if (extract_cmd->parsed()) return cmd_extract(extract_path, config_flag, as_json);
        if (gen_form->parsed()) return cmd_gen_form(spec_path, gen_out);
        if (eval->parsed()) return cmd_eval(eval_schema, eval_gold, eval_runs, as_json);
        if (cost->parsed()) return cmd_cost(cost_params, as_json);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}
