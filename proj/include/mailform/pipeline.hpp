#pragma once

#include "mailform/config.hpp"
#include "mailform/doc_extract.hpp"
#include "mailform/mail_ingest.hpp"
#include "mailform/plan_engine.hpp"
#include "mailform/reply_compose.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mailform::pipeline {

// Per-request lifecycle. Transitions follow
// Received → Extracted → Planned → Filled → Replied, with Failed reachable
// from any non-terminal state. Skipped marks a redelivered duplicate that
// never entered processing.
enum class State { Received, Extracted, Planned, Filled, Replied, Failed, Skipped };

const char* to_string(State state);
State state_from_string(std::string_view s);

struct ProcessingRecord {
    std::string message_id;
    State state = State::Received;
    std::map<std::string, double> timings;      // ocr/llm/fill/total _elapsed seconds
    std::map<std::string, int> attempt_counts;  // per retryable stage
    std::optional<std::string> failure_reason;
    std::map<std::string, std::string> outputs; // filled_pdf_digest, reply_digest
    std::optional<std::string> note;

    std::string to_json_line() const;
    static ProcessingRecord from_json_line(const std::string& line);
};

// Append-only JSON Lines file, one record per line. The one component whose
// write failure is fatal: idempotency depends on it.
class Ledger {
public:
    explicit Ledger(std::filesystem::path path) : path_(std::move(path)) {}

    // Appends one line, flushed before returning; gives back the 0-based
    // position of the appended record. Only terminal or skip states are
    // accepted.
    size_t append(const ProcessingRecord& record);
    std::vector<ProcessingRecord> load() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;

    size_t count_lines() const;
};

// Test seams: a controllable clock for backoff sleeps and a stage-boundary
// hook that fault-injection tests use to simulate crashes. Exceptions thrown
// by on_boundary propagate untouched - by design they bypass the ledger.
struct PipelineHooks {
    std::function<void(std::chrono::milliseconds)> sleep;
    std::function<void(const std::string& boundary)> on_boundary;
};

// Boundaries, in order: "classified", "extracted", "planned", "filled",
// "sent", "recorded".

class Pipeline {
public:
    Pipeline(cfg::Config config, extract::OcrBackend& ocr, plan::LlmBackend& llm,
             reply::DeliverySink& sink, PipelineHooks hooks = {});

    // Loads the ledger and cursor, then reconciles outbox files that have no
    // ledger entry (a crash between send and append) into Replied records.
    void startup_reconcile();

    // Runs the full state machine for one request and appends the terminal
    // record. Retryable stage errors back off exponentially within the
    // configured budget; permanent failures produce a rejection reply when
    // user-addressable.
    ProcessingRecord process_request(ingest::InboundRequest request);

    // One poll cycle: ingest new messages, skip already-processed ids,
    // process the rest. Returns the number of requests processed.
    int run_tick();

    // Poll loop with graceful shutdown: an in-flight request always completes
    // before the loop exits. Ledger write failures propagate (fatal).
    void run_daemon(const std::atomic<bool>& shutdown);

    bool already_processed(const std::string& message_id) const {
        return processed_.count(message_id) > 0;
    }
    ProcessingRecord record_skip(const std::string& message_id);

    const Ledger& ledger() const { return ledger_; }
    const cfg::Config& config() const { return config_; }

private:
    cfg::Config config_;
    extract::OcrBackend& ocr_;
    plan::LlmBackend& llm_;
    reply::DeliverySink& sink_;
    PipelineHooks hooks_;
    Ledger ledger_;
    ingest::Cursor cursor_;
    std::set<std::string> processed_;
    const std::atomic<bool>* shutdown_ = nullptr;

    template <typename F>
    auto with_retries(const std::string& stage, ProcessingRecord& record, F&& fn);

    void record_and_track(ProcessingRecord& record);
    void boundary(const std::string& name);
};

// Backend factories driven by config; tokens come from the environment.
std::unique_ptr<extract::OcrBackend> make_ocr_backend(const cfg::Config& config);
std::unique_ptr<plan::LlmBackend> make_llm_backend(const cfg::Config& config);

} // namespace mailform::pipeline
