#include "mailform/eval_harness.hpp"

#include "mailform/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace mailform::evalh {

using nlohmann::json;

const char* to_string(FieldScore score) {
    switch (score) {
    case FieldScore::Correct: return "correct";
    case FieldScore::Incorrect: return "incorrect";
    case FieldScore::Blank: return "blank";
    }
    return "blank";
}

GoldKey GoldKey::load(const std::filesystem::path& path) {
    json parsed = json::parse(util::read_file(path), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::Parse, "gold key " + path.string() + " is not a JSON object");
    GoldKey gold;
    for (const auto& [key, value] : parsed.items()) {
        std::string name = util::normalize_name(key);
        if (value.is_null())
            gold.entries[name] = std::nullopt;
        else if (value.is_string())
            gold.entries[name] = value.get<std::string>();
        else
            throw Error::permanent(ErrorKind::Parse,
                                   "gold key value for '" + key + "' must be string or null");
    }
    return gold;
}

ScoreReport score_plan(const Observed& observed, const GoldKey& gold,
                       const form::FormSchema& schema) {
    std::set<std::string> schema_names;
    for (const form::FormField& f : schema.fields)
        schema_names.insert(f.name);

    if (gold.entries.size() != schema_names.size())
        throw Error::permanent(ErrorKind::Scoring,
                               "gold key has " + std::to_string(gold.entries.size()) +
                                   " entries but the schema has " +
                                   std::to_string(schema_names.size()) + " fields");
    for (const auto& [name, expected] : gold.entries)
        if (!schema_names.count(name))
            throw Error::permanent(ErrorKind::Scoring,
                                   "gold key field '" + name + "' is not in the schema");
    for (const auto& [name, value] : observed)
        if (!schema_names.count(name))
            throw Error::permanent(ErrorKind::Scoring,
                                   "observed field '" + name + "' is not in the schema");

    ScoreReport report;
    report.total = static_cast<int>(schema_names.size());
    for (const std::string& name : schema_names) {
        auto it = observed.find(name);
        const std::string value = (it == observed.end()) ? "" : it->second;
        const std::optional<std::string>& expected = gold.entries.at(name);
        FieldScore score;
        if (value.empty()) {
            score = FieldScore::Blank;
        } else if (expected &&
                   util::fold_for_match(value) == util::fold_for_match(*expected)) {
            score = FieldScore::Correct;
        } else {
            score = FieldScore::Incorrect; // mismatch, or a filled ExpectedBlank
        }
        report.per_field[name] = score;
        switch (score) {
        case FieldScore::Correct: ++report.correct; break;
        case FieldScore::Incorrect: ++report.incorrect; break;
        case FieldScore::Blank: ++report.blank; break;
        }
    }
    return report;
}

std::vector<BatchRow> score_batch(const std::vector<std::pair<std::string, Observed>>& runs,
                                  const GoldKey& gold, const form::FormSchema& schema) {
    std::vector<BatchRow> rows;
    for (const auto& [label, observed] : runs)
        rows.push_back(BatchRow{label, score_plan(observed, gold, schema)});
    std::sort(rows.begin(), rows.end(), [](const BatchRow& a, const BatchRow& b) {
        if (a.report.correct != b.report.correct)
            return a.report.correct > b.report.correct;
        return a.label < b.label;
    });
    return rows;
}

std::vector<std::pair<std::string, Observed>> load_runs_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw Error::permanent(ErrorKind::Io, "runs directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (fs::directory_iterator it(dir, ec), end; it != end && !ec; it.increment(ec))
        if (it->is_regular_file(ec) && it->path().extension() == ".json")
            files.push_back(it->path());
    std::sort(files.begin(), files.end());

    std::vector<std::pair<std::string, Observed>> runs;
    for (const fs::path& file : files) {
        json parsed = json::parse(util::read_file(file), nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object())
            throw Error::permanent(ErrorKind::Parse,
                                   "run file " + file.string() + " is not a JSON object");
        Observed observed;
        for (const auto& [key, value] : parsed.items()) {
            std::string name = util::normalize_name(key);
            if (value.is_null())
                observed[name] = "";
            else if (value.is_string())
                observed[name] = value.get<std::string>();
            else
                throw Error::permanent(ErrorKind::Parse, "run file " + file.string() +
                                                             ": value for '" + key +
                                                             "' must be string or null");
        }
        runs.emplace_back(file.stem().string(), std::move(observed));
    }
    return runs;
}

std::string render_score_table(const std::vector<BatchRow>& rows) {
    size_t label_width = 5;
    for (const BatchRow& row : rows)
        label_width = std::max(label_width, row.label.size());
    std::ostringstream out;
    out << std::left;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %7s  %9s  %5s  %5s",
                  static_cast<int>(label_width), "Model", "Correct", "Incorrect", "Blank",
                  "Total");
    out << line << "\n";
    out << std::string(label_width + 33, '-') << "\n";
    for (const BatchRow& row : rows) {
        std::snprintf(line, sizeof line, "%-*s  %7d  %9d  %5d  %5d",
                      static_cast<int>(label_width), row.label.c_str(), row.report.correct,
                      row.report.incorrect, row.report.blank, row.report.total);
        out << line << "\n";
    }
    return out.str();
}

std::string score_table_json(const std::vector<BatchRow>& rows) {
    json out = json::array();
    for (const BatchRow& row : rows) {
        json per_field = json::object();
        for (const auto& [name, score] : row.report.per_field)
            per_field[name] = to_string(score);
        out.push_back(json{
            {"label", row.label},
            {"correct", row.report.correct},
            {"incorrect", row.report.incorrect},
            {"blank", row.report.blank},
            {"total", row.report.total},
            {"per_field", per_field},
        });
    }
    return out.dump(2);
}

CostReport cost_model(const CostParams& params) {
    if (params.annual_salary_eur <= 0 || params.hours_per_week <= 0 ||
        params.weeks_per_year <= 0 || params.manual_minutes <= 0)
        throw Error::permanent(ErrorKind::Config,
                               "salary, hours, weeks and manual minutes must be positive");
    if (params.supervision_minutes < 0 || params.cloud_cost_eur < 0)
        throw Error::permanent(ErrorKind::Config,
                               "supervision minutes and cloud cost must be non-negative");

    CostReport report;
    report.hourly_wage_eur =
        params.annual_salary_eur / (params.hours_per_week * params.weeks_per_year);
    report.manual_cost_eur = params.manual_minutes / 60.0 * report.hourly_wage_eur;
    report.system_cost_eur =
        params.cloud_cost_eur + params.supervision_minutes / 60.0 * report.hourly_wage_eur;
    report.savings_eur = report.manual_cost_eur - report.system_cost_eur;
    report.savings_pct = report.savings_eur / report.manual_cost_eur;
    return report;
}

std::string render_cost_report(const CostReport& report) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "Hourly wage:       EUR %.2f\n"
                  "Manual cost/form:  EUR %.2f\n"
                  "System cost/form:  EUR %.2f\n"
                  "Savings/form:      EUR %.2f (%.1f%%)\n",
                  report.hourly_wage_eur, report.manual_cost_eur, report.system_cost_eur,
                  report.savings_eur, report.savings_pct * 100.0);
    return buf;
}

std::string cost_report_json(const CostReport& report) {
    json out{
        {"hourly_wage_eur", report.hourly_wage_eur},
        {"manual_cost_eur", report.manual_cost_eur},
        {"system_cost_eur", report.system_cost_eur},
        {"savings_eur", report.savings_eur},
        {"savings_pct", report.savings_pct},
    };
    return out.dump(2);
}

} // namespace mailform::evalh
