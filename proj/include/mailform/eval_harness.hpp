#pragma once

#include "mailform/form_model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mailform::evalh {

// The evaluation answer sheet: every schema field is either Expected(value)
// or ExpectedBlank (std::nullopt).
struct GoldKey {
    std::map<std::string, std::optional<std::string>> entries;

    // JSON object field → string | null (null = ExpectedBlank).
    static GoldKey load(const std::filesystem::path& path);
};

enum class FieldScore { Correct, Incorrect, Blank };

const char* to_string(FieldScore score);

struct ScoreReport {
    int correct = 0;
    int incorrect = 0;
    int blank = 0;
    int total = 0;
    std::map<std::string, FieldScore> per_field;
};

// Observed values: field → string, empty string meaning the field was left
// blank. May come from a completion plan or from form read-back.
using Observed = std::map<std::string, std::string>;

// Per-field classification: empty value → Blank; non-empty matching the
// gold Expected value (trim / case-insensitive / composed) → Correct;
// any other non-empty value, including one filling an ExpectedBlank field,
// → Incorrect. Gold keys must equal the schema names exactly and observed
// keys must be a subset; anything else raises Error(Scoring).
ScoreReport score_plan(const Observed& observed, const GoldKey& gold,
                       const form::FormSchema& schema);

struct BatchRow {
    std::string label;
    ScoreReport report;
};

// One row per run, sorted by correct descending then label.
std::vector<BatchRow> score_batch(const std::vector<std::pair<std::string, Observed>>& runs,
                                  const GoldKey& gold, const form::FormSchema& schema);

// Reads every `<label>.json` in a directory as an observed plan
// (string | null values; null and "" both mean blank).
std::vector<std::pair<std::string, Observed>> load_runs_dir(const std::filesystem::path& dir);

std::string render_score_table(const std::vector<BatchRow>& rows);
std::string score_table_json(const std::vector<BatchRow>& rows);

struct CostParams {
    double annual_salary_eur = 40000.0;
    double hours_per_week = 40.0;
    double weeks_per_year = 52.0;
    double manual_minutes = 15.0;
    double supervision_minutes = 5.0;
    double cloud_cost_eur = 0.10;
};

struct CostReport {
    double hourly_wage_eur = 0;
    double manual_cost_eur = 0;
    double system_cost_eur = 0;
    double savings_eur = 0;
    double savings_pct = 0; // fraction of manual cost
};

// hourly = salary / (hours × weeks); manual = minutes/60 × hourly;
// system = cloud + supervision/60 × hourly. Unrounded; presentation rounds
// to cents and tenths of a percent. Throws Error(Config) on non-positive
// parameters (cloud cost and supervision minutes may be zero).
CostReport cost_model(const CostParams& params);

std::string render_cost_report(const CostReport& report);
std::string cost_report_json(const CostReport& report);

} // namespace mailform::evalh
