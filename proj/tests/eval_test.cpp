#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mailform/errors.hpp"
#include "mailform/eval_harness.hpp"
#include "mailform/form_model.hpp"

#include "helpers.hpp"

#include <random>

using namespace mailform;
using evalh::FieldScore;
using evalh::GoldKey;
using evalh::Observed;
using form::FieldKind;

namespace {

form::FormSchema fixture_schema() {
    return form::read_schema(form::generate_test_form(form::field_specs_from_json_text(
        util::read_file(testutil::fixtures_dir() / "eval" / "form_spec.json"))));
}

GoldKey fixture_gold() {
    return GoldKey::load(testutil::fixtures_dir() / "eval" / "gold.json");
}

Observed observed_from_gold(const GoldKey& gold) {
    Observed out;
    for (const auto& [name, expected] : gold.entries)
        out[name] = expected.value_or("");
    return out;
}

// Independent per-field classifier used as the brute-force oracle. Written
// directly from the definition, sharing nothing with score_plan.
FieldScore oracle_classify(const std::string& observed, const std::optional<std::string>& gold) {
    if (observed.empty())
        return FieldScore::Blank;
    if (!gold.has_value())
        return FieldScore::Incorrect;
    auto simplify = [](std::string s) {
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
        while (!s.empty() && s.back() == ' ') s.pop_back();
        for (char& c : s)
            if (c >= 'A' && c <= 'Z') c += 32;
        return s;
    };
    return simplify(observed) == simplify(*gold) ? FieldScore::Correct : FieldScore::Incorrect;
}

} // namespace

TEST_CASE("fixture sanity: 29 fields, 17 expected, 12 expected-blank") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    CHECK(schema.fields.size() == 29);
    CHECK(gold.entries.size() == 29);
    int expected = 0, blank = 0;
    for (const auto& [name, value] : gold.entries)
        value ? ++expected : ++blank;
    CHECK(expected == 17);
    CHECK(blank == 12);
    bool has_checkbox = false, has_choice = false;
    for (const form::FormField& f : schema.fields) {
        has_checkbox |= f.kind == FieldKind::Checkbox;
        has_choice |= f.kind == FieldKind::Choice;
    }
    CHECK(has_checkbox);
    CHECK(has_choice);
}

TEST_CASE("gold played back as observed scores the optimal row") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    evalh::ScoreReport report = evalh::score_plan(observed_from_gold(gold), gold, schema);
    CHECK(report.correct == 17);
    CHECK(report.incorrect == 0);
    CHECK(report.blank == 12);
    CHECK(report.total == 29);
}

TEST_CASE("all-empty observed scores (0, 0, 29)") {
    form::FormSchema schema = fixture_schema();
    evalh::ScoreReport report = evalh::score_plan({}, fixture_gold(), schema);
    CHECK(report.correct == 0);
    CHECK(report.incorrect == 0);
    CHECK(report.blank == 29);
}

TEST_CASE("engineered 16/2/11 run matches the published row shape") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    auto runs = evalh::load_runs_dir(testutil::fixtures_dir() / "eval" / "runs");
    const Observed* maverick = nullptr;
    for (const auto& [label, observed] : runs)
        if (label == "llama-4-maverick-17b-128e-instruct") maverick = &observed;
    REQUIRE(maverick != nullptr);
    evalh::ScoreReport report = evalh::score_plan(*maverick, gold, schema);
    CHECK(report.correct == 16);
    CHECK(report.incorrect == 2);
    CHECK(report.blank == 11);
}

TEST_CASE("matching is trim/case/composition insensitive") {
    form::FormSchema schema = form::read_schema(form::generate_test_form({
        {"a", FieldKind::Text, {}, std::nullopt},
        {"b", FieldKind::Text, {}, std::nullopt},
    }));
    GoldKey gold;
    gold.entries["a"] = "Aut\xc3\xb3nomo";
    gold.entries["b"] = std::nullopt;
    evalh::ScoreReport report =
        evalh::score_plan({{"a", "  AUTO\xcc\x81NOMO "}}, gold, schema);
    CHECK(report.correct == 1);
    CHECK(report.blank == 1);
}

TEST_CASE("filling an expected-blank field counts incorrect") {
    form::FormSchema schema = form::read_schema(form::generate_test_form({
        {"a", FieldKind::Text, {}, std::nullopt},
    }));
    GoldKey gold;
    gold.entries["a"] = std::nullopt;
    evalh::ScoreReport report = evalh::score_plan({{"a", "invented"}}, gold, schema);
    CHECK(report.incorrect == 1);
    CHECK(report.per_field.at("a") == FieldScore::Incorrect);
}

TEST_CASE("key-set mismatches raise scoring errors") {
    form::FormSchema schema = form::read_schema(form::generate_test_form({
        {"a", FieldKind::Text, {}, std::nullopt},
    }));
    GoldKey gold;
    gold.entries["a"] = "x";
    CHECK_THROWS_AS(evalh::score_plan({{"zz", "1"}}, gold, schema), Error);
    GoldKey short_gold; // missing field
    CHECK_THROWS_AS(evalh::score_plan({}, short_gold, schema), Error);
    GoldKey wrong_gold;
    wrong_gold.entries["other"] = "x";
    CHECK_THROWS_AS(evalh::score_plan({}, wrong_gold, schema), Error);
}

TEST_CASE("property: rows always sum to the schema size") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    std::mt19937 rng(99);
    std::vector<std::string> names;
    for (const form::FormField& f : schema.fields) names.push_back(f.name);
    for (int round = 0; round < 50; ++round) {
        Observed observed;
        for (const std::string& name : names) {
            switch (rng() % 4) {
            case 0: break;                                  // absent → blank
            case 1: observed[name] = ""; break;             // empty → blank
            case 2: observed[name] = "RANDOM-" + std::to_string(rng() % 10); break;
            default:
                observed[name] = gold.entries.at(name).value_or("STILL WRONG");
            }
        }
        evalh::ScoreReport report = evalh::score_plan(observed, gold, schema);
        CHECK(report.correct + report.incorrect + report.blank == 29);
        CHECK(report.total == 29);
    }
}

TEST_CASE("property: flipping one blank to its expected value moves exactly one count") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    Observed observed; // start all blank
    evalh::ScoreReport before = evalh::score_plan(observed, gold, schema);
    for (const auto& [name, expected] : gold.entries) {
        if (!expected) continue;
        Observed flipped = observed;
        flipped[name] = *expected;
        evalh::ScoreReport after = evalh::score_plan(flipped, gold, schema);
        CHECK(after.correct == before.correct + 1);
        CHECK(after.blank == before.blank - 1);
        CHECK(after.incorrect == before.incorrect);
    }
}

TEST_CASE("brute force: score_plan equals the oracle over exhaustive assignments") {
    // schemas of 1..4 fields; gold marks even-indexed fields Expected
    int mismatches = 0;
    for (int field_count = 1; field_count <= 4; ++field_count) {
        std::vector<form::FieldSpec> spec;
        for (int i = 0; i < field_count; ++i)
            spec.push_back({"g" + std::to_string(i), FieldKind::Text, {}, std::nullopt});
        form::FormSchema schema = form::read_schema(form::generate_test_form(spec));
        GoldKey gold;
        for (int i = 0; i < field_count; ++i)
            gold.entries["g" + std::to_string(i)] =
                (i % 2 == 0) ? std::optional<std::string>("Value" + std::to_string(i))
                             : std::nullopt;

        // candidate observed values per field: empty, exact, case-variant, wrong
        std::vector<std::vector<std::string>> candidates(static_cast<size_t>(field_count));
        for (int i = 0; i < field_count; ++i)
            candidates[static_cast<size_t>(i)] = {"", "Value" + std::to_string(i),
                                                  "VALUE" + std::to_string(i), "WRONG"};

        size_t combos = 1;
        for (int i = 0; i < field_count; ++i) combos *= 4;
        for (size_t code = 0; code < combos; ++code) {
            Observed observed;
            size_t rest = code;
            for (int i = 0; i < field_count; ++i) {
                const std::string& value = candidates[static_cast<size_t>(i)][rest % 4];
                rest /= 4;
                if (!value.empty())
                    observed["g" + std::to_string(i)] = value;
            }
            evalh::ScoreReport report = evalh::score_plan(observed, gold, schema);
            int oc = 0, oi = 0, ob = 0;
            for (int i = 0; i < field_count; ++i) {
                std::string name = "g" + std::to_string(i);
                auto it = observed.find(name);
                FieldScore expected_score = oracle_classify(
                    it == observed.end() ? "" : it->second, gold.entries.at(name));
                switch (expected_score) {
                case FieldScore::Correct: ++oc; break;
                case FieldScore::Incorrect: ++oi; break;
                case FieldScore::Blank: ++ob; break;
                }
                if (report.per_field.at(name) != expected_score) ++mismatches;
            }
            if (report.correct != oc || report.incorrect != oi || report.blank != ob)
                ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("score_batch reproduces every published row, in published order") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    auto runs = evalh::load_runs_dir(testutil::fixtures_dir() / "eval" / "runs");
    REQUIRE(runs.size() == 8);
    std::vector<evalh::BatchRow> rows = evalh::score_batch(runs, gold, schema);
    REQUIRE(rows.size() == 8);

    const std::vector<std::tuple<std::string, int, int, int>> expected{
        {"Optimal result", 17, 0, 12},
        {"llama-4-maverick-17b-128e-instruct", 16, 2, 11},
        {"llama-4-scout-17b-16e-instruct", 14, 3, 12},
        {"gemini-2.5-pro", 13, 4, 12},
        {"chatgpt-4.1", 12, 5, 12},
        {"deepseek-r1", 12, 5, 12},
        {"llama-3.3-70b-instruct", 10, 8, 11},
        {"qwen-qwq-32b", 10, 10, 9},
    };
    for (size_t i = 0; i < expected.size(); ++i) {
        const auto& [label, c, inc, b] = expected[i];
        CHECK(rows[i].label == label);
        CHECK(rows[i].report.correct == c);
        CHECK(rows[i].report.incorrect == inc);
        CHECK(rows[i].report.blank == b);
        CHECK(rows[i].report.correct + rows[i].report.incorrect + rows[i].report.blank == 29);
    }
}

TEST_CASE("single run renders a single row") {
    form::FormSchema schema = fixture_schema();
    GoldKey gold = fixture_gold();
    auto rows = evalh::score_batch({{"solo", observed_from_gold(gold)}}, gold, schema);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].label == "solo");
    std::string table = evalh::render_score_table(rows);
    CHECK(table.find("solo") != std::string::npos);
    CHECK(table.find("17") != std::string::npos);
}

TEST_CASE("cost model reproduces the published numbers with defaults") {
    evalh::CostReport report = evalh::cost_model({});
    CHECK(report.hourly_wage_eur == doctest::Approx(19.23).epsilon(0.0003));
    CHECK(report.manual_cost_eur == doctest::Approx(4.81).epsilon(0.001));
    CHECK(report.system_cost_eur == doctest::Approx(1.70).epsilon(0.002));
    CHECK(report.savings_eur == doctest::Approx(3.11).epsilon(0.002));
    CHECK(report.savings_pct * 100 == doctest::Approx(64.6).epsilon(0.001));
}

TEST_CASE("cost model: free system means 100% savings") {
    evalh::CostParams params;
    params.supervision_minutes = 0;
    params.cloud_cost_eur = 0;
    evalh::CostReport report = evalh::cost_model(params);
    CHECK(report.system_cost_eur == 0.0);
    CHECK(report.savings_pct == doctest::Approx(1.0));
}

TEST_CASE("cost model: twenty manual minutes (hand-computed oracle)") {
    evalh::CostParams params;
    params.manual_minutes = 20;
    evalh::CostReport report = evalh::cost_model(params);
    // oracle: 20/60 h x (40000 / 2080) EUR/h
    double expected = 20.0 / 60.0 * (40000.0 / 2080.0);
    CHECK(report.manual_cost_eur == doctest::Approx(expected).epsilon(1e-12));
    CHECK(report.manual_cost_eur == doctest::Approx(6.41).epsilon(0.001));
}

TEST_CASE("cost identities hold exactly pre-rounding") {
    std::mt19937 rng(5);
    for (int round = 0; round < 100; ++round) {
        evalh::CostParams params;
        params.annual_salary_eur = 1000.0 + rng() % 100000;
        params.hours_per_week = 1.0 + rng() % 60;
        params.weeks_per_year = 1.0 + rng() % 52;
        params.manual_minutes = 1.0 + rng() % 120;
        params.supervision_minutes = rng() % 60;
        params.cloud_cost_eur = (rng() % 100) / 100.0;
        evalh::CostReport report = evalh::cost_model(params);
        CHECK(report.savings_eur + report.system_cost_eur ==
              doctest::Approx(report.manual_cost_eur).epsilon(1e-12));
        CHECK(report.savings_pct ==
              doctest::Approx(report.savings_eur / report.manual_cost_eur).epsilon(1e-12));
    }
}

TEST_CASE("cost model is monotone in supervision minutes and cloud cost") {
    evalh::CostParams base;
    evalh::CostReport r0 = evalh::cost_model(base);
    for (double extra : {1.0, 5.0, 30.0}) {
        evalh::CostParams more_supervision = base;
        more_supervision.supervision_minutes += extra;
        CHECK(evalh::cost_model(more_supervision).system_cost_eur > r0.system_cost_eur);
        evalh::CostParams more_cloud = base;
        more_cloud.cloud_cost_eur += extra;
        CHECK(evalh::cost_model(more_cloud).system_cost_eur > r0.system_cost_eur);
    }
}

TEST_CASE("cost model rejects non-positive core parameters") {
    evalh::CostParams params;
    params.manual_minutes = 0;
    CHECK_THROWS_AS(evalh::cost_model(params), Error);
    params = {};
    params.hours_per_week = -1;
    CHECK_THROWS_AS(evalh::cost_model(params), Error);
    params = {};
    params.cloud_cost_eur = -0.01;
    CHECK_THROWS_AS(evalh::cost_model(params), Error);
}
