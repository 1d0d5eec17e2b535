#include "mailform/pipeline.hpp"

#include "mailform/errors.hpp"
#include "mailform/mime.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <thread>

namespace mailform::pipeline {

using nlohmann::json;

const char* to_string(State state) {
    switch (state) {
    case State::Received: return "Received";
    case State::Extracted: return "Extracted";
    case State::Planned: return "Planned";
    case State::Filled: return "Filled";
    case State::Replied: return "Replied";
    case State::Failed: return "Failed";
    case State::Skipped: return "Skipped";
    }
    return "Received";
}

State state_from_string(std::string_view s) {
    if (s == "Received") return State::Received;
    if (s == "Extracted") return State::Extracted;
    if (s == "Planned") return State::Planned;
    if (s == "Filled") return State::Filled;
    if (s == "Replied") return State::Replied;
    if (s == "Failed") return State::Failed;
    if (s == "Skipped") return State::Skipped;
    throw Error::permanent(ErrorKind::Parse, "unknown state '" + std::string(s) + "'");
}

std::string ProcessingRecord::to_json_line() const {
    json out{
        {"message_id", message_id},
        {"state", to_string(state)},
        {"timings", timings},
        {"attempt_counts", attempt_counts},
        {"failure_reason", failure_reason ? json(*failure_reason) : json(nullptr)},
        {"outputs", outputs},
        {"note", note ? json(*note) : json(nullptr)},
    };
    return out.dump();
}

ProcessingRecord ProcessingRecord::from_json_line(const std::string& line) {
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::Parse, "ledger line is not a JSON object");
    ProcessingRecord record;
    record.message_id = parsed.value("message_id", "");
    record.state = state_from_string(parsed.value("state", "Received"));
    if (parsed.contains("timings"))
        record.timings = parsed["timings"].get<std::map<std::string, double>>();
    if (parsed.contains("attempt_counts"))
        record.attempt_counts = parsed["attempt_counts"].get<std::map<std::string, int>>();
    if (parsed.contains("failure_reason") && parsed["failure_reason"].is_string())
        record.failure_reason = parsed["failure_reason"].get<std::string>();
    if (parsed.contains("outputs"))
        record.outputs = parsed["outputs"].get<std::map<std::string, std::string>>();
    if (parsed.contains("note") && parsed["note"].is_string())
        record.note = parsed["note"].get<std::string>();
    return record;
}

size_t Ledger::count_lines() const {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return 0;
    size_t lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    return lines;
}

size_t Ledger::append(const ProcessingRecord& record) {
    if (record.state != State::Replied && record.state != State::Failed &&
        record.state != State::Skipped)
        throw Error::permanent(ErrorKind::Ledger,
                               "only terminal or skip records may be appended to the ledger");
    size_t position = count_lines();
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out)
        throw Error::permanent(ErrorKind::Ledger, "cannot open ledger " + path_.string());
    out << record.to_json_line() << "\n";
    out.flush();
    if (!out)
        throw Error::permanent(ErrorKind::Ledger, "ledger append failed for " + path_.string());
    return position;
}

std::vector<ProcessingRecord> Ledger::load() const {
    std::vector<ProcessingRecord> records;
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        return records; // absent ledger: fresh start
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(ProcessingRecord::from_json_line(line));
    }
    return records;
}

Pipeline::Pipeline(cfg::Config config, extract::OcrBackend& ocr, plan::LlmBackend& llm,
                   reply::DeliverySink& sink, PipelineHooks hooks)
    : config_(std::move(config)), ocr_(ocr), llm_(llm), sink_(sink), hooks_(std::move(hooks)),
      ledger_(config_.ledger_path) {
    if (!hooks_.sleep)
        hooks_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (!hooks_.on_boundary)
        hooks_.on_boundary = [](const std::string&) {};
}

void Pipeline::boundary(const std::string& name) {
    hooks_.on_boundary(name);
}

void Pipeline::startup_reconcile() {
    processed_.clear();
    for (const ProcessingRecord& record : ledger_.load())
        if (record.state == State::Replied || record.state == State::Failed)
            processed_.insert(record.message_id);
    cursor_ = ingest::Cursor::load(config_.cursor_path);

    // Replies that made it to the outbox without a ledger entry mean the
    // previous run died between send and append. Adopt them.
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(config_.outbox_dir, ec))
        return;
    for (fs::directory_iterator it(config_.outbox_dir, ec), end; it != end && !ec;
         it.increment(ec)) {
        if (!it->is_regular_file(ec)) continue;
        if (it->path().extension() != ".eml") continue;
        Bytes bytes;
        try {
            bytes = util::read_file(it->path());
        } catch (const Error&) {
            continue;
        }
        std::string request_id;
        try {
            request_id = mime::parse(bytes).in_reply_to;
        } catch (const Error&) {
            continue;
        }
        if (request_id.empty() || processed_.count(request_id))
            continue;
        ProcessingRecord record;
        record.message_id = request_id;
        record.state = State::Replied;
        record.outputs["reply_digest"] = util::sha256_hex(bytes);
        record.note = "reconciled from outbox after restart";
        ledger_.append(record);
        processed_.insert(request_id);
        util::log_info("reconciled outbox reply for message " + request_id);
    }
}

template <typename F>
auto Pipeline::with_retries(const std::string& stage, ProcessingRecord& record, F&& fn) {
    int attempts = 0;
    for (;;) {
        ++attempts;
        record.attempt_counts[stage] = attempts;
        try {
            return fn();
        } catch (const Error& e) {
            if (!e.retryable() || attempts >= config_.retry.budget)
                throw;
            double delay_s = config_.retry.backoff_base_s *
                             std::pow(config_.retry.backoff_factor, attempts - 1);
            util::log_warn(stage + " attempt " + std::to_string(attempts) + " failed (" +
                           e.what() + "), retrying in " + std::to_string(delay_s) + "s");
            hooks_.sleep(std::chrono::milliseconds(static_cast<long>(delay_s * 1000)));
        }
    }
}

void Pipeline::record_and_track(ProcessingRecord& record) {
    ledger_.append(record);
    if (record.state == State::Replied || record.state == State::Failed)
        processed_.insert(record.message_id);
}

ProcessingRecord Pipeline::process_request(ingest::InboundRequest request) {
    ProcessingRecord record;
    record.message_id = request.message_id;
    record.state = State::Received;
    auto total_start = std::chrono::steady_clock::now();
    auto seconds_since = [](std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    try {
        if (!request.classified)
            request = ingest::classify_attachments(std::move(request));
        boundary("classified");

        if (request.no_target_form)
            throw Error::permanent(ErrorKind::Format, "no fillable PDF form attached");
        const ingest::Attachment& target =
            request.attachments[static_cast<size_t>(request.target_form_index())];

        // extract context documents
        std::vector<extract::ExtractedDocument> docs;
        double ocr_elapsed = 0;
        for (const ingest::Attachment& att : request.attachments) {
            if (att.kind != ingest::AttachmentKind::ContextDocument)
                continue;
            extract::ExtractedDocument doc;
            try {
                doc = with_retries("ocr", record,
                                   [&] { return extract::extract_text(att, ocr_); });
            } catch (const Error& e) {
                if (e.retryable())
                    throw Error::permanent(ErrorKind::Backend,
                                           "text extraction kept failing for attachment '" +
                                               att.filename + "': " + e.what());
                throw Error::permanent(ErrorKind::Backend,
                                       "text extraction failed for attachment '" + att.filename +
                                           "': " + e.what());
            }
            ocr_elapsed += doc.elapsed_s;
            docs.push_back(extract::filter_blocks(doc, config_.min_confidence));
        }
        record.timings["ocr_elapsed"] = ocr_elapsed;
        record.state = State::Extracted;
        boundary("extracted");

        // plan
        form::FormSchema schema = form::read_schema(target.bytes);
        std::string context = extract::render_context(docs);
        plan::PromptBundle bundle = plan::build_prompt(request.instruction_text, schema, context);
        double llm_elapsed = 0;
        plan::CompletionPlan completion;
        plan::PlanResponse first =
            with_retries("llm", record, [&] { return plan::request_plan(bundle, llm_); });
        llm_elapsed += first.elapsed_s;
        try {
            completion = plan::parse_plan(first.raw, schema);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::PlanParse)
                throw;
            // exactly one repair attempt
            plan::PromptBundle repaired = plan::repair_request(bundle, first.raw, e.what());
            plan::PlanResponse second = with_retries(
                "llm_repair", record, [&] { return plan::request_plan(repaired, llm_); });
            llm_elapsed += second.elapsed_s;
            try {
                completion = plan::parse_plan(second.raw, schema);
            } catch (const Error& e2) {
                if (e2.kind() != ErrorKind::PlanParse)
                    throw;
                throw Error::permanent(ErrorKind::PlanParse,
                                       "plan parse failed even after one repair attempt: " +
                                           std::string(e2.what()));
            }
            completion.warnings.push_back("first model reply was unparseable; repaired prompt used");
        }
        completion.model_name = llm_.model_name();
        completion.elapsed_s = llm_elapsed;
        record.timings["llm_elapsed"] = llm_elapsed;
        record.state = State::Planned;
        boundary("planned");

        // fill
        auto fill_start = std::chrono::steady_clock::now();
        form::FilledForm filled = form::fill_form(target.bytes, completion.entries);
        record.timings["fill_elapsed"] = seconds_since(fill_start);
        record.outputs["filled_pdf_digest"] = util::sha256_hex(filled.bytes);
        record.state = State::Filled;
        boundary("filled");

        // reply
        reply::ComposedReply composed =
            reply::compose_reply(request, filled, completion, config_.reply_from);
        record.outputs["reply_digest"] = util::sha256_hex(composed.bytes);
        reply::DeliveryReceipt receipt = with_retries("send", record, [&] {
            return sink_.deliver(composed.bytes, composed.reply.message_id);
        });
        if (receipt.duplicate)
            record.note = "outbox already contained this reply; kept the existing file";
        record.state = State::Replied;
        boundary("sent");
    } catch (const Error& e) {
        record.state = State::Failed;
        record.failure_reason = e.what();
        util::log_warn("request " + request.message_id + " failed: " + e.what());
        // Every failure reaching here is content- or backend-level, which the
        // sender can act on; ledger trouble is thrown before this point.
        try {
            reply::ComposedReply rejection =
                reply::compose_rejection(request, e.what(), config_.reply_from);
            reply::DeliveryReceipt receipt = with_retries("send", record, [&] {
                return sink_.deliver(rejection.bytes, rejection.reply.message_id);
            });
            record.outputs["reply_digest"] = util::sha256_hex(rejection.bytes);
            if (receipt.duplicate)
                record.note = "outbox already contained this rejection";
        } catch (const Error& send_error) {
            util::log_warn("could not deliver rejection for " + request.message_id + ": " +
                           send_error.what());
        }
        boundary("sent");
    }

    record.timings["total_elapsed"] = seconds_since(total_start);
    record_and_track(record);
    boundary("recorded");
    return record;
}

ProcessingRecord Pipeline::record_skip(const std::string& message_id) {
    ProcessingRecord record;
    record.message_id = message_id;
    record.state = State::Skipped;
    record.note = "duplicate delivery of an already-processed message";
    ledger_.append(record);
    return record;
}

int Pipeline::run_tick() {
    ingest::PollResult polled = ingest::poll_inbox(config_.inbox_dir, cursor_);
    int processed_count = 0;
    for (const ingest::PolledMessage& message : polled.messages) {
        if (shutdown_ && shutdown_->load())
            break; // not yet cursored: picked up again on the next run
        std::string digest = util::sha256_hex(message.bytes);
        ingest::InboundRequest request;
        try {
            request = ingest::parse_inbound(message.bytes);
        } catch (const Error& e) {
            util::log_warn("cannot parse " + message.filename + ": " + e.what());
            cursor_.seen[message.filename] = digest;
            cursor_.save(config_.cursor_path);
            continue;
        }
        if (already_processed(request.message_id)) {
            record_skip(request.message_id);
            util::log_info("skipping duplicate delivery of " + request.message_id);
        } else {
            process_request(std::move(request));
            ++processed_count;
        }
        cursor_.seen[message.filename] = digest;
        cursor_.save(config_.cursor_path);
    }
    return processed_count;
}

void Pipeline::run_daemon(const std::atomic<bool>& shutdown) {
    shutdown_ = &shutdown;
    startup_reconcile();
    util::log_info("watching inbox " + config_.inbox_dir.string());
    while (!shutdown.load()) {
        try {
            run_tick();
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Ledger)
                throw; // fatal: idempotency depends on the ledger
            util::log_warn(std::string("poll failed: ") + e.what() + "; retrying next tick");
        }
        // sleep in small slices so shutdown stays responsive
        double remaining = config_.poll_interval_s;
        while (remaining > 0 && !shutdown.load()) {
            double slice = std::min(remaining, 0.05);
            hooks_.sleep(std::chrono::milliseconds(static_cast<long>(slice * 1000)));
            remaining -= slice;
        }
    }
    shutdown_ = nullptr;
}

std::unique_ptr<extract::OcrBackend> make_ocr_backend(const cfg::Config& config) {
    if (config.ocr.backend == "remote") {
        if (config.ocr.base_url.empty())
            throw Error::permanent(ErrorKind::Config, "ocr.base_url required for the remote backend");
        return std::make_unique<extract::RemoteOcrBackend>(config.ocr.base_url,
                                                           cfg::ocr_token_from_env());
    }
    return std::make_unique<extract::StubOcrBackend>(config.fixtures_dir);
}

std::unique_ptr<plan::LlmBackend> make_llm_backend(const cfg::Config& config) {
    if (config.llm.backend == "remote") {
        if (config.llm.base_url.empty())
            throw Error::permanent(ErrorKind::Config, "llm.base_url required for the remote backend");
        return std::make_unique<plan::RemoteLlmBackend>(config.llm.base_url, config.llm.model,
                                                        config.llm.temperature,
                                                        cfg::llm_token_from_env());
    }
    if (!config.llm.script_path.empty())
        return std::make_unique<plan::MockLlmBackend>(
            plan::MockLlmBackend::from_file(config.llm.script_path));
    return std::make_unique<plan::MockLlmBackend>();
}

} // namespace mailform::pipeline
