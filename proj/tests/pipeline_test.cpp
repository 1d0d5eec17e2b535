#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mailform/errors.hpp"
#include "mailform/pipeline.hpp"

#include "helpers.hpp"

#include <atomic>
#include <thread>

using namespace mailform;
using form::FieldKind;
using pipeline::Pipeline;
using pipeline::PipelineHooks;
using pipeline::ProcessingRecord;
using pipeline::State;
using testutil::TempDir;

namespace {

// thrown by the boundary hook to simulate the process dying mid-request
struct CrashInjected {
    std::string boundary;
};

struct Env {
    TempDir dir;
    cfg::Config config;
    extract::StubOcrBackend ocr;
    plan::MockLlmBackend llm;
    reply::OutboxSink sink;
    std::vector<std::chrono::milliseconds> sleeps;

    Bytes form_pdf;
    Bytes scan_png;
    std::string golden_eml_id = "golden-1@example.com";

    explicit Env(plan::MockLlmBackend::Script script = {})
        : config(testutil::make_config(dir.path)), ocr(config.fixtures_dir),
          llm(std::move(script)), sink(config.outbox_dir) {
        form_pdf = form::generate_test_form({
            {"nombre", FieldKind::Text, {}, std::nullopt},
            {"apellidos", FieldKind::Text, {}, std::nullopt},
            {"dni", FieldKind::Text, {}, 9},
            {"tel\xc3\xa9" "fono", FieldKind::Text, {}, std::nullopt},
            {"autorizo", FieldKind::Checkbox, {}, std::nullopt},
        });
        scan_png = testutil::fake_png("golden-scan");
        testutil::write_sidecar(config.fixtures_dir, scan_png,
                                "NOMBRE: MARIA\nAPELLIDOS: GARCIA LOPEZ\nDNI: 12345678Z\n"
                                "AUTORIZO: s\xc3\xad\n");
    }

    Bytes golden_eml(const std::string& message_id) const {
        return testutil::make_eml(message_id, "Alta aut\xc3\xb3nomo",
                                  "Fill the form with the attached ID",
                                  {{"form.pdf", "application/pdf", form_pdf},
                                   {"scan.png", "image/png", scan_png}});
    }

    void drop_golden(const std::string& filename, const std::string& message_id) {
        testutil::write_file(config.inbox_dir / filename, golden_eml(message_id));
    }

    PipelineHooks hooks(std::function<void(const std::string&)> on_boundary = {}) {
        PipelineHooks h;
        h.sleep = [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
        h.on_boundary = std::move(on_boundary);
        return h;
    }

    size_t outbox_count() const {
        size_t n = 0;
        for (const auto& entry : std::filesystem::directory_iterator(config.outbox_dir))
            if (entry.path().extension() == ".eml") ++n;
        return n;
    }
};

// OCR backend that fails a set number of times before delegating to the stub.
class FlakyOcr : public extract::OcrBackend {
public:
    FlakyOcr(extract::OcrBackend& inner, int failures, bool retryable)
        : inner_(inner), failures_left_(failures), retryable_(retryable) {}
    std::string name() const override { return "flaky"; }
    std::vector<extract::TextBlock> recognize(const ingest::Attachment& att) override {
        if (failures_left_ > 0) {
            --failures_left_;
            throw Error(ErrorKind::Backend, "synthetic outage", retryable_);
        }
        return inner_.recognize(att);
    }

private:
    extract::OcrBackend& inner_;
    int failures_left_;
    bool retryable_;
};

} // namespace

TEST_CASE("golden path: fixture request ends Replied with a verifiable reply") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();

    REQUIRE(pipe.run_tick() == 1);

    // ledger: exactly one Replied record with full timings
    auto records = pipe.ledger().load();
    REQUIRE(records.size() == 1);
    const ProcessingRecord& record = records[0];
    CHECK(record.message_id == env.golden_eml_id);
    CHECK(record.state == State::Replied);
    for (const char* key : {"ocr_elapsed", "llm_elapsed", "fill_elapsed", "total_elapsed"})
        REQUIRE(record.timings.count(key));
    for (const auto& [stage, seconds] : record.timings)
        CHECK(record.timings.at("total_elapsed") >= seconds - 1e-9);

    // outbox: one reply threading back to the request
    REQUIRE(env.outbox_count() == 1);
    std::filesystem::path reply_path;
    for (const auto& entry : std::filesystem::directory_iterator(env.config.outbox_dir))
        reply_path = entry.path();
    ingest::InboundRequest reply_msg = ingest::parse_inbound(util::read_file(reply_path));
    mime::Message parsed_reply = mime::parse(util::read_file(reply_path));
    CHECK(parsed_reply.in_reply_to == env.golden_eml_id);
    CHECK(parsed_reply.subject == "Re: Alta aut\xc3\xb3nomo");

    // the attached PDF agrees with what the planner decided
    REQUIRE(reply_msg.attachments.size() == 1);
    CHECK(util::sha256_hex(reply_msg.attachments[0].bytes) ==
          record.outputs.at("filled_pdf_digest"));
    auto values = form::read_back(reply_msg.attachments[0].bytes);
    CHECK(values.at("nombre") == "MARIA");
    CHECK(values.at("apellidos") == "GARCIA LOPEZ");
    CHECK(values.at("dni") == "12345678Z");
    CHECK(values.at("autorizo") == "true");
    CHECK(values.at("tel\xc3\xa9" "fono") == ""); // not in context → intentional blank
}

TEST_CASE("request without a fillable form fails with a rejection reply") {
    Env env;
    Bytes raw = testutil::make_eml("noform-1@example.com", "Consulta", "please",
                                   {{"scan.png", "image/png", env.scan_png}});
    testutil::write_file(env.config.inbox_dir / "001-noform.eml", raw);
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    pipe.run_tick();

    auto records = pipe.ledger().load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].state == State::Failed);
    REQUIRE(records[0].failure_reason.has_value());
    CHECK(records[0].failure_reason->find("no fillable PDF") != std::string::npos);

    REQUIRE(env.outbox_count() == 1);
    for (const auto& entry : std::filesystem::directory_iterator(env.config.outbox_dir)) {
        ingest::InboundRequest rejection = ingest::parse_inbound(util::read_file(entry.path()));
        CHECK(rejection.attachments.empty());
        CHECK(rejection.instruction_text.find("no fillable PDF") != std::string::npos);
    }
}

TEST_CASE("garbage model output twice ends Failed after exactly one repair") {
    Bytes form_pdf = form::generate_test_form({
        {"nombre", FieldKind::Text, {}, std::nullopt},
        {"apellidos", FieldKind::Text, {}, std::nullopt},
        {"dni", FieldKind::Text, {}, 9},
        {"tel\xc3\xa9" "fono", FieldKind::Text, {}, std::nullopt},
        {"autorizo", FieldKind::Checkbox, {}, std::nullopt},
    });
    std::string digest = form::schema_digest(form::read_schema(form_pdf));
    plan::MockLlmBackend::Script script;
    script[digest] = {{"words, no JSON", false}, {"still not parseable", false}};

    Env env(std::move(script));
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    pipe.run_tick();

    auto records = pipe.ledger().load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].state == State::Failed);
    CHECK(records[0].failure_reason->find("plan parse") != std::string::npos);
    CHECK(records[0].attempt_counts.at("llm") == 1);
    CHECK(records[0].attempt_counts.at("llm_repair") == 1); // exactly one repair
    CHECK(env.outbox_count() == 1);                         // the rejection
}

TEST_CASE("retryable OCR outage is retried with exponential backoff") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    FlakyOcr flaky(env.ocr, 2, /*retryable=*/true);
    Pipeline pipe(env.config, flaky, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    pipe.run_tick();

    auto records = pipe.ledger().load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].state == State::Replied);
    CHECK(records[0].attempt_counts.at("ocr") == 3);
    REQUIRE(env.sleeps.size() == 2); // backoff between the three attempts
    CHECK(env.sleeps[0] == std::chrono::milliseconds(1000));
    CHECK(env.sleeps[1] == std::chrono::milliseconds(2000));
}

TEST_CASE("retry exhaustion fails the request and names the attachment") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    FlakyOcr flaky(env.ocr, 99, /*retryable=*/true);
    Pipeline pipe(env.config, flaky, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    pipe.run_tick();

    auto records = pipe.ledger().load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].state == State::Failed);
    CHECK(records[0].attempt_counts.at("ocr") == 3); // budget respected
    CHECK(records[0].failure_reason->find("scan.png") != std::string::npos);
    CHECK(env.sleeps.size() == 2);
}

TEST_CASE("permanent OCR error is not retried") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    FlakyOcr flaky(env.ocr, 99, /*retryable=*/false);
    Pipeline pipe(env.config, flaky, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    pipe.run_tick();

    auto records = pipe.ledger().load();
    CHECK(records[0].state == State::Failed);
    CHECK(records[0].attempt_counts.at("ocr") == 1);
    CHECK(env.sleeps.empty());
}

TEST_CASE("ledger round trip, ordering and replay") {
    TempDir dir;
    pipeline::Ledger ledger(dir / "ledger.jsonl");

    ProcessingRecord first;
    first.message_id = "m1@example.com";
    first.state = State::Replied;
    first.timings = {{"total_elapsed", 1.25}, {"ocr_elapsed", 0.5}};
    first.attempt_counts = {{"ocr", 2}};
    first.outputs = {{"reply_digest", "abc"}};
    ProcessingRecord second;
    second.message_id = "m2@example.com";
    second.state = State::Failed;
    second.failure_reason = "no fillable PDF form attached";

    CHECK(ledger.append(first) == 0);
    CHECK(ledger.append(second) == 1);

    auto loaded = ledger.load();
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].to_json_line() == first.to_json_line()); // field-exact round trip
    CHECK(loaded[1].to_json_line() == second.to_json_line());
    CHECK(loaded[0].message_id == "m1@example.com");
    CHECK(loaded[1].state == State::Failed);

    ProcessingRecord open_state;
    open_state.message_id = "bad";
    open_state.state = State::Planned;
    CHECK_THROWS_AS(ledger.append(open_state), Error); // only terminal/skip states

    pipeline::Ledger unwritable("/nonexistent-dir/ledger.jsonl");
    try {
        unwritable.append(first);
        FAIL("expected ledger error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Ledger);
    }
}

TEST_CASE("ledger replay rebuilds the processed set on restart") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    {
        Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
        pipe.startup_reconcile();
        pipe.run_tick();
    }
    Pipeline restarted(env.config, env.ocr, env.llm, env.sink, env.hooks());
    restarted.startup_reconcile();
    CHECK(restarted.already_processed(env.golden_eml_id));
    CHECK_FALSE(restarted.already_processed("other@example.com"));
}

TEST_CASE("redelivered message id writes a skip entry and no second reply") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    pipe.run_tick();
    CHECK(env.outbox_count() == 1);

    // same message id arrives again under a new filename
    env.drop_golden("002-redelivery.eml", env.golden_eml_id);
    CHECK(pipe.run_tick() == 0);

    auto records = pipe.ledger().load();
    REQUIRE(records.size() == 2);
    CHECK(records[1].state == State::Skipped);
    CHECK(records[1].message_id == env.golden_eml_id);
    CHECK(env.outbox_count() == 1); // still exactly one reply
}

TEST_CASE("empty inbox tick has no side effects") {
    Env env;
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    CHECK(pipe.run_tick() == 0);
    CHECK(pipe.ledger().load().empty());
    CHECK(env.outbox_count() == 0);
    CHECK_FALSE(std::filesystem::exists(env.config.cursor_path));
}

TEST_CASE("unparseable inbox file is cursored away without a ledger entry") {
    Env env;
    testutil::write_file(env.config.inbox_dir / "bad.eml",
                         "Content-Type: multipart/mixed\r\n\r\nno boundary param");
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    CHECK(pipe.run_tick() == 0);
    CHECK(pipe.ledger().load().empty());
    CHECK(pipe.run_tick() == 0); // cursored: not reprocessed
}

TEST_CASE("crash at every stage boundary never yields a duplicate reply") {
    const std::vector<std::string> boundaries{"classified", "extracted", "planned",
                                              "filled",     "sent",      "recorded"};
    for (const std::string& target : boundaries) {
        CAPTURE(target);
        Env env;
        env.drop_golden("001-golden.eml", env.golden_eml_id);

        bool armed = true;
        auto crash_hook = [&](const std::string& boundary) {
            if (armed && boundary == target) {
                armed = false;
                throw CrashInjected{boundary};
            }
        };
        {
            Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks(crash_hook));
            pipe.startup_reconcile();
            bool crashed = false;
            try {
                pipe.run_tick();
            } catch (const CrashInjected&) {
                crashed = true;
            }
            CHECK(crashed);
        }

        // restart: reconcile and poll again
        Pipeline restarted(env.config, env.ocr, env.llm, env.sink, env.hooks());
        restarted.startup_reconcile();
        restarted.run_tick();

        CHECK(env.outbox_count() == 1);
        size_t replied = 0;
        for (const ProcessingRecord& record : restarted.ledger().load())
            if (record.state == State::Replied && record.message_id == env.golden_eml_id)
                ++replied;
        CHECK(replied == 1);
    }
}

TEST_CASE("outbox reconciliation adopts replies that missed the ledger") {
    Env env;
    env.drop_golden("001-golden.eml", env.golden_eml_id);
    {
        // crash between send and ledger append
        bool armed = true;
        auto crash_hook = [&](const std::string& boundary) {
            if (armed && boundary == "sent") {
                armed = false;
                throw CrashInjected{boundary};
            }
        };
        Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks(crash_hook));
        pipe.startup_reconcile();
        try {
            pipe.run_tick();
        } catch (const CrashInjected&) {
        }
        CHECK(pipe.ledger().load().empty()); // died before the append
        CHECK(env.outbox_count() == 1);
    }
    Pipeline restarted(env.config, env.ocr, env.llm, env.sink, env.hooks());
    restarted.startup_reconcile();
    auto records = restarted.ledger().load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].state == State::Replied);
    CHECK(records[0].message_id == env.golden_eml_id);
    REQUIRE(records[0].note.has_value());
    CHECK(records[0].note->find("reconciled") != std::string::npos);
    CHECK(restarted.already_processed(env.golden_eml_id));
}

TEST_CASE("daemon: three fixtures in one tick produce three ledger entries and replies") {
    Env env;
    env.drop_golden("001.eml", "d1@example.com");
    env.drop_golden("002.eml", "d2@example.com");
    env.drop_golden("003.eml", "d3@example.com");
    Pipeline pipe(env.config, env.ocr, env.llm, env.sink, env.hooks());
    pipe.startup_reconcile();
    CHECK(pipe.run_tick() == 3);
    CHECK(pipe.ledger().load().size() == 3);
    CHECK(env.outbox_count() == 3);
}

TEST_CASE("daemon loop processes work and honors the shutdown flag") {
    Env env;
    env.config.poll_interval_s = 0.02;
    env.drop_golden("001.eml", "loop-1@example.com");
    reply::OutboxSink sink(env.config.outbox_dir);
    PipelineHooks hooks; // real sleeps, tiny interval
    Pipeline pipe(env.config, env.ocr, env.llm, sink, hooks);

    std::atomic<bool> shutdown{false};
    std::thread runner([&] { pipe.run_daemon(shutdown); });
    for (int i = 0; i < 200 && env.outbox_count() < 1; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    env.drop_golden("002.eml", "loop-2@example.com");
    for (int i = 0; i < 200 && env.outbox_count() < 2; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    shutdown.store(true);
    runner.join();
    CHECK(env.outbox_count() == 2);
}
