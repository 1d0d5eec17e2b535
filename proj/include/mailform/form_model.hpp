#pragma once

#include "mailform/util.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mailform::form {

enum class FieldKind { Text, Checkbox, Choice };

const char* to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view s);

struct FormField {
    std::string name;                  // normalized (trim, collapse ws, compose)
    std::string raw_name;              // as stored in the PDF
    FieldKind kind = FieldKind::Text;
    int page = 1;                      // 1-based
    std::vector<std::string> options;  // Choice only
    std::optional<int> max_len;        // Text only
};

struct FormSchema {
    std::string form_digest;           // sha256 of the source PDF bytes
    std::vector<FormField> fields;

    bool empty() const { return fields.empty(); }
    const FormField* field(std::string_view normalized_name) const;
    std::vector<std::string> field_names() const;
};

// Canonical digest over names, kinds, options and max_len. Identifies the
// field structure independently of the PDF bytes; prompt bundles and the
// scripted mock backend key on it.
std::string schema_digest(const FormSchema& schema);

// A total or partial assignment of field name → value, where std::nullopt is
// an explicit intentional blank. Shared vocabulary between the planner and
// the form filler.
using FieldValues = std::map<std::string, std::optional<std::string>>;

struct FilledForm {
    Bytes bytes;
    std::map<std::string, std::string> applied;  // name → value actually stored
    std::map<std::string, std::string> skipped;  // name → reason
    std::vector<std::string> notes;              // e.g. truncations
};

// Checkbox truthiness: "1", "true", "yes", "x", "sí" (case-insensitive).
bool truthy(std::string_view value);

// Reads the interactive field structure. Field order is document order
// (the /Fields array, depth first). A PDF without interactive fields yields
// an empty schema; duplicate normalized names raise Error(Schema).
FormSchema read_schema(const Bytes& pdf);

// Throws Error(Schema) naming the first plan key that is not a schema field.
void validate_plan(const FieldValues& values, const FormSchema& schema);

// Applies a plan. Text values are truncated to max_len (with a note),
// checkbox values go through truthy(), choice values match options
// case-insensitively (no match → skipped, not an error). Intentional blanks
// leave the field untouched. Output stays parseable and editable.
FilledForm fill_form(const Bytes& pdf, const FieldValues& values);

// Current value of every field: text/choice as stored text, checkboxes as
// "true"/"". The verification side of the fill round-trip.
std::map<std::string, std::string> read_back(const Bytes& pdf);

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::Text;
    std::vector<std::string> options;  // Choice only
    std::optional<int> max_len;        // Text only
};

// Builds a synthetic single-purpose AcroForm PDF whose read_schema equals the
// spec, in order. Throws Error(Schema) on an empty spec or duplicate names.
Bytes generate_test_form(const std::vector<FieldSpec>& spec);

// JSON codecs for the CLI surfaces.
std::string schema_to_json_text(const FormSchema& schema);
FormSchema schema_from_json_text(const std::string& text);

// gen-form input: [{"name", "kind", "options"?, "max_len"?}, ...]
std::vector<FieldSpec> field_specs_from_json_text(const std::string& text);

// fill input: {"field": "value" | null, ...}
FieldValues field_values_from_json_text(const std::string& text);

} // namespace mailform::form
