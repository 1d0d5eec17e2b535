#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mailform/eval_harness.hpp"
#include "mailform/form_model.hpp"
#include "mailform/mime.hpp"
#include "mailform/pipeline.hpp"

#include "helpers.hpp"

#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdlib>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

using namespace mailform;
using form::FieldKind;
using nlohmann::json;
using testutil::TempDir;

namespace {

std::string binary() {
    const char* env = std::getenv("MAILFORM_BIN");
    REQUIRE_MESSAGE(env != nullptr, "MAILFORM_BIN must point at the built CLI");
    return env;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args) {
    TempDir io;
    std::string out_path = (io / "out").string();
    std::string err_path = (io / "err").string();
    std::string cmd = binary() + " " + args + " >" + out_path + " 2>" + err_path;
    int status = std::system(cmd.c_str());
    RunResult result;
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = util::read_file(out_path);
    result.err = util::read_file(err_path);
    return result;
}

// environment on disk for config-driven subcommands
struct CliEnv {
    TempDir dir;
    cfg::Config config;
    std::string config_path;
    Bytes form_pdf;
    Bytes scan_png;

    CliEnv() : config(testutil::make_config(dir.path)) {
        form_pdf = form::generate_test_form({
            {"nombre", FieldKind::Text, {}, std::nullopt},
            {"dni", FieldKind::Text, {}, 9},
            {"autorizo", FieldKind::Checkbox, {}, std::nullopt},
        });
        scan_png = testutil::fake_png("cli-scan");
        testutil::write_sidecar(config.fixtures_dir, scan_png,
                                "NOMBRE: MARIA\nDNI: 12345678Z\nAUTORIZO: yes\n");
        config_path = (dir / "mailform.json").string();
        testutil::write_file(config_path, config.to_json_text());
    }

    std::string write_golden_eml(const std::string& name, const std::string& id) {
        Bytes raw = testutil::make_eml(id, "Alta", "fill please",
                                       {{"form.pdf", "application/pdf", form_pdf},
                                        {"scan.png", "image/png", scan_png}});
        std::string path = (dir / name).string();
        testutil::write_file(path, raw);
        return path;
    }
};

} // namespace

TEST_CASE("cost: defaults reproduce the published cost table") {
    RunResult result = run_cli("cost --json");
    REQUIRE(result.code == 0);
    json report = json::parse(result.out); // stdout is exactly one JSON document
    CHECK(report["hourly_wage_eur"].get<double>() == doctest::Approx(19.23).epsilon(0.0003));
    CHECK(report["manual_cost_eur"].get<double>() == doctest::Approx(4.81).epsilon(0.001));
    CHECK(report["system_cost_eur"].get<double>() == doctest::Approx(1.70).epsilon(0.002));
    CHECK(report["savings_eur"].get<double>() == doctest::Approx(3.11).epsilon(0.002));
    CHECK(report["savings_pct"].get<double>() * 100 == doctest::Approx(64.6).epsilon(0.001));

    RunResult human = run_cli("cost");
    CHECK(human.code == 0);
    CHECK(human.out.find("4.81") != std::string::npos);
    CHECK(human.out.find("1.70") != std::string::npos);
    CHECK(human.out.find("64.6") != std::string::npos);
}

TEST_CASE("cost: parameter overrides") {
    RunResult free_system = run_cli("cost --supervision-minutes 0 --cloud-cost 0 --json");
    REQUIRE(free_system.code == 0);
    json report = json::parse(free_system.out);
    CHECK(report["system_cost_eur"].get<double>() == 0.0);
    CHECK(report["savings_pct"].get<double>() == doctest::Approx(1.0));

    RunResult slower = run_cli("cost --manual-minutes 20 --json");
    REQUIRE(slower.code == 0);
    CHECK(json::parse(slower.out)["manual_cost_eur"].get<double>() ==
          doctest::Approx(20.0 / 60.0 * (40000.0 / 2080.0)).epsilon(1e-9));

    CHECK(run_cli("cost --manual-minutes 0").code == 2); // config error → usage exit
}

TEST_CASE("gen-form, schema, fill round trip through the CLI") {
    CliEnv env;
    std::string spec_path = (env.dir / "spec.json").string();
    testutil::write_file(spec_path, R"([
        {"name": "nombre", "kind": "text"},
        {"name": "ok", "kind": "checkbox"}
    ])");
    std::string pdf_path = (env.dir / "generated.pdf").string();
    REQUIRE(run_cli("gen-form " + spec_path + " " + pdf_path).code == 0);

    RunResult schema = run_cli("schema " + pdf_path + " --json");
    REQUIRE(schema.code == 0);
    json parsed = json::parse(schema.out);
    REQUIRE(parsed["fields"].size() == 2);
    CHECK(parsed["fields"][0]["name"] == "nombre");
    CHECK(parsed["fields"][1]["kind"] == "checkbox");

    std::string plan_path = (env.dir / "plan.json").string();
    testutil::write_file(plan_path, R"({"nombre": "MARIA", "ok": "yes"})");
    std::string filled_path = (env.dir / "filled.pdf").string();
    REQUIRE(run_cli("fill " + pdf_path + " " + plan_path + " " + filled_path + " --json").code == 0);
    auto values = form::read_back(util::read_file(filled_path));
    CHECK(values.at("nombre") == "MARIA");
    CHECK(values.at("ok") == "true");

    // empty plan → unchanged copy
    std::string empty_plan = (env.dir / "empty.json").string();
    testutil::write_file(empty_plan, "{}");
    std::string copied = (env.dir / "copy.pdf").string();
    REQUIRE(run_cli("fill " + pdf_path + " " + empty_plan + " " + copied).code == 0);
    for (const auto& [name, value] : form::read_back(util::read_file(copied)))
        CHECK(value == "");

    // mismatched plan key → domain error naming the field
    std::string bad_plan = (env.dir / "bad.json").string();
    testutil::write_file(bad_plan, R"({"inexistente": "x"})");
    RunResult bad = run_cli("fill " + pdf_path + " " + bad_plan + " " + copied);
    CHECK(bad.code == 3);
    CHECK(bad.err.find("inexistente") != std::string::npos);
}

TEST_CASE("process: golden fixture exits 0 with a Replied record") {
    CliEnv env;
    std::string eml = env.write_golden_eml("request.eml", "cli-golden@example.com");
    RunResult result = run_cli("process " + eml + " --config " + env.config_path + " --json");
    REQUIRE(result.code == 0);
    json record = json::parse(result.out);
    CHECK(record["state"] == "Replied");
    CHECK(record["message_id"] == "cli-golden@example.com");
    CHECK(record["timings"].contains("total_elapsed"));

    // reply landed in the outbox and the filled values came from the sidecar
    size_t replies = 0;
    for (const auto& entry : std::filesystem::directory_iterator(env.config.outbox_dir)) {
        ++replies;
        ingest::InboundRequest reply = ingest::parse_inbound(util::read_file(entry.path()));
        REQUIRE(reply.attachments.size() == 1);
        auto values = form::read_back(reply.attachments[0].bytes);
        CHECK(values.at("nombre") == "MARIA");
        CHECK(values.at("dni") == "12345678Z");
        CHECK(values.at("autorizo") == "true");
    }
    CHECK(replies == 1);

    // second run of the same message: skip entry, still exit 0, no new reply
    RunResult again = run_cli("process " + eml + " --config " + env.config_path + " --json");
    CHECK(again.code == 0);
    CHECK(json::parse(again.out)["state"] == "Skipped");
}

TEST_CASE("process: no-form fixture exits 3 with state Failed") {
    CliEnv env;
    Bytes raw = testutil::make_eml("cli-noform@example.com", "Consulta", "hello",
                                   {{"scan.png", "image/png", env.scan_png}});
    std::string path = (env.dir / "noform.eml").string();
    testutil::write_file(path, raw);
    RunResult result = run_cli("process " + path + " --config " + env.config_path + " --json");
    CHECK(result.code == 3);
    json record = json::parse(result.out);
    CHECK(record["state"] == "Failed");
}

TEST_CASE("process: nonexistent path and missing config exit 2") {
    CliEnv env;
    CHECK(run_cli("process /no/such/file.eml --config " + env.config_path).code == 2);
    std::string eml = env.write_golden_eml("r.eml", "x@example.com");
    CHECK(run_cli("process " + eml + " --config /no/such/config.json").code == 2);
    CHECK(run_cli("process " + eml).code == 2); // no config anywhere
}

TEST_CASE("usage errors exit 2 and help exits 0") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("unknown-subcommand").code == 2);
    CHECK(run_cli("fill only-one-arg").code == 2);
    CHECK(run_cli("--help").code == 0);
}

TEST_CASE("eval: bundled fixtures reproduce the published table") {
    CliEnv env;
    std::string form_pdf = (env.dir / "eval_form.pdf").string();
    REQUIRE(run_cli("gen-form " + (testutil::fixtures_dir() / "eval" / "form_spec.json").string() +
                    " " + form_pdf)
                .code == 0);
    std::string gold = (testutil::fixtures_dir() / "eval" / "gold.json").string();
    std::string runs = (testutil::fixtures_dir() / "eval" / "runs").string();

    RunResult result = run_cli("eval " + form_pdf + " " + gold + " '" + runs + "' --json");
    REQUIRE(result.code == 0);
    json rows = json::parse(result.out);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0]["label"] == "Optimal result");
    CHECK(rows[0]["correct"] == 17);
    CHECK(rows[0]["incorrect"] == 0);
    CHECK(rows[0]["blank"] == 12);
    CHECK(rows[1]["label"] == "llama-4-maverick-17b-128e-instruct");
    CHECK(rows[1]["correct"] == 16);
    for (const json& row : rows)
        CHECK(row["correct"].get<int>() + row["incorrect"].get<int>() +
                  row["blank"].get<int>() == 29);

    // human-readable table carries the same counts
    RunResult table = run_cli("eval " + form_pdf + " " + gold + " '" + runs + "'");
    CHECK(table.code == 0);
    CHECK(table.out.find("Optimal result") != std::string::npos);
    CHECK(table.out.find("17") != std::string::npos);

    // schema JSON instead of the PDF works the same
    std::string schema_json = (env.dir / "schema.json").string();
    RunResult schema_out = run_cli("schema " + form_pdf + " --json");
    testutil::write_file(schema_json, schema_out.out);
    CHECK(run_cli("eval " + schema_json + " " + gold + " '" + runs + "' --json").code == 0);
}

TEST_CASE("eval: empty runs dir exits 0, malformed run file exits 3 naming it") {
    CliEnv env;
    std::string form_pdf = (env.dir / "form.pdf").string();
    REQUIRE(run_cli("gen-form " + (testutil::fixtures_dir() / "eval" / "form_spec.json").string() +
                    " " + form_pdf)
                .code == 0);
    std::string gold = (testutil::fixtures_dir() / "eval" / "gold.json").string();

    std::string empty_runs = (env.dir / "empty-runs").string();
    std::filesystem::create_directories(empty_runs);
    RunResult empty = run_cli("eval " + form_pdf + " " + gold + " " + empty_runs + " --json");
    CHECK(empty.code == 0);
    CHECK(json::parse(empty.out).empty());

    std::string bad_runs = (env.dir / "bad-runs").string();
    std::filesystem::create_directories(bad_runs);
    testutil::write_file(bad_runs + "/broken.json", "not json at all");
    RunResult bad = run_cli("eval " + form_pdf + " " + gold + " " + bad_runs);
    CHECK(bad.code == 3);
    CHECK(bad.err.find("broken.json") != std::string::npos);
}

TEST_CASE("extract: stub backend through the CLI") {
    CliEnv env;
    std::string png_path = (env.dir / "scan.png").string();
    testutil::write_file(png_path, env.scan_png);
    RunResult result = run_cli("extract " + png_path + " --config " + env.config_path + " --json");
    REQUIRE(result.code == 0);
    json doc = json::parse(result.out);
    CHECK(doc["backend"] == "stub");
    REQUIRE(doc["blocks"].size() == 3);
    CHECK(doc["blocks"][0]["text"] == "NOMBRE: MARIA");
    CHECK(doc["blocks"][0]["confidence"] == 1.0);
}

TEST_CASE("daemon: processes the inbox and exits 0 on SIGINT") {
    CliEnv env;
    Bytes raw = testutil::make_eml("daemon-1@example.com", "Alta", "fill",
                                   {{"form.pdf", "application/pdf", env.form_pdf},
                                    {"scan.png", "image/png", env.scan_png}});
    testutil::write_file(env.config.inbox_dir / "001.eml", raw);

    // small poll interval so the test finishes quickly
    cfg::Config fast = env.config;
    fast.poll_interval_s = 0.05;
    std::string fast_config = (env.dir / "fast.json").string();
    testutil::write_file(fast_config, fast.to_json_text());

    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        std::string bin = binary();
        execl(bin.c_str(), bin.c_str(), "daemon", "--config", fast_config.c_str(),
              static_cast<char*>(nullptr));
        _exit(127);
    }
    // wait for the reply, then interrupt during an idle tick
    bool replied = false;
    for (int i = 0; i < 400 && !replied; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        for (const auto& entry : std::filesystem::directory_iterator(env.config.outbox_dir))
            if (entry.path().extension() == ".eml") replied = true;
    }
    CHECK(replied);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    ::kill(pid, SIGINT);
    int status = 0;
    ::waitpid(pid, &status, 0);
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);

    // the ledger recorded the request exactly once
    pipeline::Ledger ledger(env.config.ledger_path);
    auto records = ledger.load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].state == pipeline::State::Replied);
}

TEST_CASE("daemon: missing config exits 2") {
    CHECK(run_cli("daemon --config /no/such/config.json").code == 2);
}
