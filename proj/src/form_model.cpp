#include "mailform/form_model.hpp"

#include "mailform/errors.hpp"
#include "mailform/pdf.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <sstream>

namespace mailform::form {

using pdf::Array;
using pdf::Dict;
using pdf::Document;
using pdf::Name;
using pdf::Object;
using pdf::Ref;

namespace {

constexpr int64_t kBtnRadio = 1 << 15;
constexpr int64_t kBtnPushbutton = 1 << 16;
constexpr int64_t kChCombo = 1 << 17;

// Attributes a field may inherit from its ancestors.
struct Inherited {
    std::string ft;
    int64_t flags = 0;
    std::optional<int> max_len;
    const Object* opt = nullptr;
};

// A terminal field located in the document, with everything fill/read need.
struct Located {
    FormField field;
    Ref field_ref;
    std::vector<Ref> widget_refs; // the field itself when merged, else kids
    std::string on_state;         // checkbox/radio "on" appearance name
};

std::string widget_on_state(const Document& doc, const Dict& widget) {
    const Object* ap = doc.dict_get(widget, "AP");
    if (ap && ap->is_dict()) {
        const Object* n = doc.dict_get(ap->as_dict(), "N");
        if (n && n->is_dict())
            for (const auto& [key, val] : n->as_dict())
                if (key != "Off") return key;
    }
    return "Yes";
}

bool dict_name_is(const Document& doc, const Dict& d, const std::string& key,
                  const std::string& expected) {
    const Object* v = doc.dict_get(d, key);
    return v && v->is_name() && v->as_name().value == expected;
}

// Maps widget object number → 1-based page number via the page /Annots lists.
std::map<int, int> build_page_index(const Document& doc) {
    std::map<int, int> index;
    int page_no = 0;
    for (Ref page_ref : doc.pages()) {
        ++page_no;
        const Object* page = doc.find(page_ref);
        if (!page || !page->is_dict()) continue;
        const Object* annots = doc.dict_get(page->as_dict(), "Annots");
        if (!annots || !annots->is_array()) continue;
        for (const Object& a : annots->as_array())
            if (a.is_ref()) index.emplace(a.as_ref().num, page_no);
    }
    return index;
}

void walk_fields(const Document& doc, const Object& node_ref, const std::string& prefix,
                 Inherited inherited, const std::map<int, int>& page_index,
                 std::vector<Located>& out, int depth) {
    if (depth > 32 || !node_ref.is_ref()) return;
    const Object& node = doc.resolve(node_ref);
    if (!node.is_dict()) return;
    const Dict& d = node.as_dict();

    if (const Object* ft = doc.dict_get(d, "FT"); ft && ft->is_name())
        inherited.ft = ft->as_name().value;
    if (const Object* ff = doc.dict_get(d, "Ff"); ff && ff->is_int())
        inherited.flags = ff->as_int();
    if (const Object* ml = doc.dict_get(d, "MaxLen"); ml && ml->is_int())
        inherited.max_len = static_cast<int>(ml->as_int());
    if (const Object* opt = doc.dict_get(d, "Opt"); opt && opt->is_array())
        inherited.opt = opt;

    std::string partial;
    if (const Object* t = doc.dict_get(d, "T"); t && t->is_string())
        partial = pdf::text_string_to_utf8(t->as_string());

    const Object* kids = doc.dict_get(d, "Kids");
    bool kids_are_fields = false;
    if (kids && kids->is_array()) {
        for (const Object& kid : kids->as_array()) {
            const Object& kd = doc.resolve(kid);
            if (kd.is_dict() && kd.as_dict().count("T")) {
                kids_are_fields = true;
                break;
            }
        }
    }

    if (kids_are_fields) {
        std::string next_prefix = prefix;
        if (!partial.empty())
            next_prefix = prefix.empty() ? partial : prefix + "." + partial;
        for (const Object& kid : kids->as_array())
            walk_fields(doc, kid, next_prefix, inherited, page_index, out, depth + 1);
        return;
    }

    // Terminal field. Pushbuttons carry no value and are not part of the
    // fillable schema.
    if (inherited.ft.empty() || partial.empty()) return;
    if (inherited.ft == "Btn" && (inherited.flags & kBtnPushbutton)) return;

    Located loc;
    loc.field_ref = node_ref.as_ref();
    loc.field.raw_name = prefix.empty() ? partial : prefix + "." + partial;
    loc.field.name = util::normalize_name(loc.field.raw_name);

    if (kids && kids->is_array()) {
        for (const Object& kid : kids->as_array())
            if (kid.is_ref()) loc.widget_refs.push_back(kid.as_ref());
    } else {
        loc.widget_refs.push_back(node_ref.as_ref());
    }

    if (inherited.ft == "Tx") {
        loc.field.kind = FieldKind::Text;
        loc.field.max_len = inherited.max_len;
    } else if (inherited.ft == "Ch") {
        loc.field.kind = FieldKind::Choice;
        if (inherited.opt)
            for (const Object& entry : inherited.opt->as_array()) {
                const Object& e = doc.resolve(entry);
                if (e.is_string())
                    loc.field.options.push_back(pdf::text_string_to_utf8(e.as_string()));
                else if (e.is_array() && !e.as_array().empty()) {
                    const Object& exp = doc.resolve(e.as_array()[0]);
                    if (exp.is_string())
                        loc.field.options.push_back(pdf::text_string_to_utf8(exp.as_string()));
                }
            }
    } else if (inherited.ft == "Btn" && (inherited.flags & kBtnRadio)) {
        // radio groups surface as Choice over their on-state names
        loc.field.kind = FieldKind::Choice;
        for (Ref w : loc.widget_refs) {
            const Object* widget = doc.find(w);
            if (!widget || !widget->is_dict()) continue;
            std::string state = widget_on_state(doc, widget->as_dict());
            if (std::find(loc.field.options.begin(), loc.field.options.end(), state) ==
                loc.field.options.end())
                loc.field.options.push_back(state);
        }
        loc.on_state = loc.field.options.empty() ? "Yes" : loc.field.options.front();
    } else if (inherited.ft == "Btn") {
        loc.field.kind = FieldKind::Checkbox;
        const Object* first_widget = doc.find(loc.widget_refs.front());
        loc.on_state = (first_widget && first_widget->is_dict())
                           ? widget_on_state(doc, first_widget->as_dict())
                           : "Yes";
    } else {
        return; // signatures etc.
    }

    loc.field.page = 1;
    for (Ref w : loc.widget_refs) {
        auto it = page_index.find(w.num);
        if (it != page_index.end()) {
            loc.field.page = it->second;
            break;
        }
    }
    out.push_back(std::move(loc));
}

std::vector<Located> locate_fields(const Document& doc) {
    std::vector<Located> out;
    const Object* cat = doc.catalog();
    if (!cat) return out;
    const Object* acro = doc.dict_get(cat->as_dict(), "AcroForm");
    if (!acro || !acro->is_dict()) return out;
    const Object* fields = doc.dict_get(acro->as_dict(), "Fields");
    if (!fields || !fields->is_array()) return out;
    std::map<int, int> page_index = build_page_index(doc);
    for (const Object& f : fields->as_array())
        walk_fields(doc, f, "", Inherited{}, page_index, out, 0);
    return out;
}

FormSchema schema_from_located(const std::vector<Located>& located, const Bytes& pdf_bytes) {
    FormSchema schema;
    schema.form_digest = util::sha256_hex(pdf_bytes);
    std::set<std::string> seen;
    for (const Located& loc : located) {
        if (!seen.insert(loc.field.name).second)
            throw Error::permanent(ErrorKind::Schema,
                                   "duplicate field name after normalization: '" + loc.field.name + "'");
        schema.fields.push_back(loc.field);
    }
    return schema;
}

// Ensure /NeedAppearances is set so viewers regenerate widget appearances
// for the values we write.
void set_need_appearances(Document& doc) {
    Object* cat_holder = nullptr;
    auto it = doc.trailer().find("Root");
    if (it == doc.trailer().end()) return;
    if (it->second.is_ref())
        cat_holder = doc.find_mut(it->second.as_ref());
    if (!cat_holder || !cat_holder->is_dict()) return;
    auto acro_it = cat_holder->as_dict().find("AcroForm");
    if (acro_it == cat_holder->as_dict().end()) return;
    if (acro_it->second.is_ref()) {
        Object* acro = doc.find_mut(acro_it->second.as_ref());
        if (acro && acro->is_dict())
            acro->as_dict()["NeedAppearances"] = Object(true);
    } else if (acro_it->second.is_dict()) {
        acro_it->second.as_dict()["NeedAppearances"] = Object(true);
    }
}

} // namespace

const char* to_string(FieldKind kind) {
    switch (kind) {
    case FieldKind::Text: return "text";
    case FieldKind::Checkbox: return "checkbox";
    case FieldKind::Choice: return "choice";
    }
    return "text";
}

FieldKind field_kind_from_string(std::string_view s) {
    if (s == "text") return FieldKind::Text;
    if (s == "checkbox") return FieldKind::Checkbox;
    if (s == "choice") return FieldKind::Choice;
    throw Error::permanent(ErrorKind::Schema, "unknown field kind '" + std::string(s) + "'");
}

const FormField* FormSchema::field(std::string_view normalized_name) const {
    for (const FormField& f : fields)
        if (f.name == normalized_name) return &f;
    return nullptr;
}

std::vector<std::string> FormSchema::field_names() const {
    std::vector<std::string> out;
    out.reserve(fields.size());
    for (const FormField& f : fields) out.push_back(f.name);
    return out;
}

std::string schema_digest(const FormSchema& schema) {
    std::string canon;
    for (const FormField& f : schema.fields) {
        canon += f.name;
        canon += '\x1f';
        canon += to_string(f.kind);
        canon += '\x1f';
        for (const std::string& opt : f.options) {
            canon += opt;
            canon += '\x1c';
        }
        canon += '\x1f';
        canon += f.max_len ? std::to_string(*f.max_len) : "-";
        canon += '\x1e';
    }
    return util::sha256_hex(canon);
}

bool truthy(std::string_view value) {
    std::string v = util::fold_for_match(value);
    return v == "1" || v == "true" || v == "yes" || v == "x" || v == "s\xc3\xad";
}

FormSchema read_schema(const Bytes& pdf_bytes) {
    Document doc = Document::parse(pdf_bytes);
    return schema_from_located(locate_fields(doc), pdf_bytes);
}

void validate_plan(const FieldValues& values, const FormSchema& schema) {
    for (const auto& [name, value] : values)
        if (!schema.field(name))
            throw Error::permanent(ErrorKind::Schema,
                                   "plan entry '" + name + "' is not a field of this form");
}

FilledForm fill_form(const Bytes& pdf_bytes, const FieldValues& values) {
    Document doc = Document::parse(pdf_bytes);
    std::vector<Located> located = locate_fields(doc);
    FormSchema schema = schema_from_located(located, pdf_bytes);
    validate_plan(values, schema);

    FilledForm result;
    for (const Located& loc : located) {
        auto it = values.find(loc.field.name);
        if (it == values.end() || !it->second.has_value())
            continue; // absent or intentional blank: leave untouched
        const std::string& value = *it->second;

        Object* field_obj = doc.find_mut(loc.field_ref);
        if (!field_obj || !field_obj->is_dict())
            throw Error::permanent(ErrorKind::Io, "lost field object for '" + loc.field.name + "'");
        Dict& fd = field_obj->as_dict();

        switch (loc.field.kind) {
        case FieldKind::Text: {
            std::string stored = value;
            if (loc.field.max_len && stored.size() > static_cast<size_t>(*loc.field.max_len)) {
                stored = stored.substr(0, static_cast<size_t>(*loc.field.max_len));
                result.notes.push_back("'" + loc.field.name + "': value exceeded max length " +
                                       std::to_string(*loc.field.max_len) + ", truncated");
            }
            fd["V"] = Object(pdf::utf8_to_text_string(stored));
            result.applied[loc.field.name] = stored;
            break;
        }
        case FieldKind::Checkbox: {
            bool on = truthy(value);
            std::string state = on ? loc.on_state : "Off";
            fd["V"] = Object(Name{state});
            for (Ref w : loc.widget_refs) {
                Object* widget = doc.find_mut(w);
                if (widget && widget->is_dict())
                    widget->as_dict()["AS"] = Object(Name{state});
            }
            result.applied[loc.field.name] = on ? "true" : "";
            break;
        }
        case FieldKind::Choice: {
            std::string want = util::fold_for_match(value);
            const std::string* match = nullptr;
            for (const std::string& opt : loc.field.options)
                if (util::fold_for_match(opt) == want) {
                    match = &opt;
                    break;
                }
            if (!match) {
                result.skipped[loc.field.name] =
                    "no option matching '" + value + "' (options: " +
                    util::join(loc.field.options, ", ") + ")";
                break;
            }
            if (loc.on_state.empty()) {
                fd["V"] = Object(pdf::utf8_to_text_string(*match));
            } else {
                // radio group: /V is the on-state name, widgets follow
                fd["V"] = Object(Name{*match});
                for (Ref w : loc.widget_refs) {
                    Object* widget = doc.find_mut(w);
                    if (!widget || !widget->is_dict()) continue;
                    std::string ws = widget_on_state(doc, widget->as_dict());
                    widget->as_dict()["AS"] = Object(Name{ws == *match ? ws : "Off"});
                }
            }
            result.applied[loc.field.name] = *match;
            break;
        }
        }
    }

    set_need_appearances(doc);
    result.bytes = doc.serialize();
    return result;
}

std::map<std::string, std::string> read_back(const Bytes& pdf_bytes) {
    Document doc = Document::parse(pdf_bytes);
    std::map<std::string, std::string> out;
    for (const Located& loc : locate_fields(doc)) {
        const Object* field_obj = doc.find(loc.field_ref);
        std::string value;
        if (field_obj && field_obj->is_dict()) {
            const Object* v = doc.dict_get(field_obj->as_dict(), "V");
            if (v) {
                switch (loc.field.kind) {
                case FieldKind::Text:
                    if (v->is_string()) value = pdf::text_string_to_utf8(v->as_string());
                    break;
                case FieldKind::Checkbox:
                    if (v->is_name() && v->as_name().value != "Off") value = "true";
                    break;
                case FieldKind::Choice:
                    if (v->is_string())
                        value = pdf::text_string_to_utf8(v->as_string());
                    else if (v->is_name() && v->as_name().value != "Off")
                        value = v->as_name().value;
                    else if (v->is_array() && !v->as_array().empty()) {
                        const Object& first = doc.resolve(v->as_array().front());
                        if (first.is_string()) value = pdf::text_string_to_utf8(first.as_string());
                    }
                    break;
                }
            }
        }
        out[loc.field.name] = value;
    }
    return out;
}

namespace {

// Label text for the generated page; content streams use a simple font, so
// anything outside ASCII is shown as '?'.
std::string ascii_label(const std::string& s) {
    std::string out;
    size_t i = 0;
    while (i < s.size()) {
        uint32_t cp = util::next_codepoint(s, i);
        out.push_back(cp >= 32 && cp < 127 ? static_cast<char>(cp) : '?');
    }
    return out;
}

} // namespace

Bytes generate_test_form(const std::vector<FieldSpec>& spec) {
    if (spec.empty())
        throw Error::permanent(ErrorKind::Schema, "form spec is empty");
    {
        std::set<std::string> seen;
        for (const FieldSpec& f : spec)
            if (!seen.insert(util::normalize_name(f.name)).second)
                throw Error::permanent(ErrorKind::Schema,
                                       "duplicate field name in spec: '" + f.name + "'");
        for (const FieldSpec& f : spec)
            if (f.kind == FieldKind::Choice && f.options.empty())
                throw Error::permanent(ErrorKind::Schema,
                                       "choice field '" + f.name + "' has no options");
    }

    Document doc;
    constexpr double kPageW = 612, kPageH = 792;
    constexpr double kTop = 750, kBottom = 50, kStep = 22;
    const int per_page = static_cast<int>((kTop - kBottom) / kStep) + 1;
    const int page_count = (static_cast<int>(spec.size()) + per_page - 1) / per_page;

    Ref catalog_ref = doc.add_object(Object(Dict{}));
    Ref pages_ref = doc.add_object(Object(Dict{}));
    Ref font_ref = doc.add_object(Object(Dict{
        {"Type", Object(Name{"Font"})},
        {"Subtype", Object(Name{"Type1"})},
        {"BaseFont", Object(Name{"Helvetica"})},
    }));

    std::vector<Ref> page_refs;
    std::vector<Array> page_annots(static_cast<size_t>(page_count));
    std::vector<std::string> page_content(static_cast<size_t>(page_count));
    for (int p = 0; p < page_count; ++p)
        page_refs.push_back(doc.add_object(Object(Dict{}))); // placeholder

    Array field_refs;
    for (size_t i = 0; i < spec.size(); ++i) {
        const FieldSpec& f = spec[i];
        int p = static_cast<int>(i) / per_page;
        double y = kTop - kStep * static_cast<double>(static_cast<int>(i) % per_page);

        Dict fd{
            {"Type", Object(Name{"Annot"})},
            {"Subtype", Object(Name{"Widget"})},
            {"F", Object(4)},
            {"P", Object(page_refs[static_cast<size_t>(p)])},
            {"T", Object(pdf::utf8_to_text_string(f.name))},
            {"DA", Object(std::string("/Helv 10 Tf 0 g"))},
        };

        switch (f.kind) {
        case FieldKind::Text:
            fd["FT"] = Object(Name{"Tx"});
            fd["Rect"] = Object(Array{Object(160.0), Object(y), Object(420.0), Object(y + 16)});
            if (f.max_len) fd["MaxLen"] = Object(static_cast<int64_t>(*f.max_len));
            break;
        case FieldKind::Checkbox: {
            fd["FT"] = Object(Name{"Btn"});
            fd["V"] = Object(Name{"Off"});
            fd["AS"] = Object(Name{"Off"});
            fd["Rect"] = Object(Array{Object(160.0), Object(y), Object(174.0), Object(y + 14)});
            auto on_stream = std::make_shared<pdf::Stream>();
            on_stream->data = "q 1 w 2 2 m 12 12 l S 12 2 m 2 12 l S Q";
            on_stream->dict = Dict{
                {"Type", Object(Name{"XObject"})},
                {"Subtype", Object(Name{"Form"})},
                {"BBox", Object(Array{Object(0), Object(0), Object(14.0), Object(14.0)})},
                {"Length", Object(static_cast<int64_t>(on_stream->data.size()))},
            };
            auto off_stream = std::make_shared<pdf::Stream>();
            off_stream->data = "";
            off_stream->dict = Dict{
                {"Type", Object(Name{"XObject"})},
                {"Subtype", Object(Name{"Form"})},
                {"BBox", Object(Array{Object(0), Object(0), Object(14.0), Object(14.0)})},
                {"Length", Object(0)},
            };
            Ref on_ref = doc.add_object(Object(on_stream));
            Ref off_ref = doc.add_object(Object(off_stream));
            fd["AP"] = Object(Dict{{"N", Object(Dict{
                                        {"Yes", Object(on_ref)},
                                        {"Off", Object(off_ref)},
                                    })}});
            break;
        }
        case FieldKind::Choice: {
            fd["FT"] = Object(Name{"Ch"});
            fd["Ff"] = Object(kChCombo);
            fd["Rect"] = Object(Array{Object(160.0), Object(y), Object(420.0), Object(y + 16)});
            Array opts;
            for (const std::string& o : f.options)
                opts.push_back(Object(pdf::utf8_to_text_string(o)));
            fd["Opt"] = Object(std::move(opts));
            break;
        }
        }

        Ref field_ref = doc.add_object(Object(std::move(fd)));
        field_refs.push_back(Object(field_ref));
        page_annots[static_cast<size_t>(p)].push_back(Object(field_ref));

        std::string label = ascii_label(f.name);
        std::string escaped;
        escaped.push_back('(');
        for (char c : label) {
            if (c == '(' || c == ')' || c == '\\') escaped.push_back('\\');
            escaped.push_back(c);
        }
        escaped.push_back(')');
        page_content[static_cast<size_t>(p)] +=
            "BT /Helv 9 Tf 36 " + std::to_string(static_cast<int>(y + 4)) + " Td " + escaped +
            " Tj ET\n";
    }

    Array kids;
    for (int p = 0; p < page_count; ++p) {
        auto content = std::make_shared<pdf::Stream>();
        content->data = page_content[static_cast<size_t>(p)];
        content->dict["Length"] = Object(static_cast<int64_t>(content->data.size()));
        Ref content_ref = doc.add_object(Object(content));
        Dict page{
            {"Type", Object(Name{"Page"})},
            {"Parent", Object(pages_ref)},
            {"MediaBox", Object(Array{Object(0), Object(0), Object(kPageW), Object(kPageH)})},
            {"Resources", Object(Dict{{"Font", Object(Dict{{"Helv", Object(font_ref)}})}})},
            {"Contents", Object(content_ref)},
            {"Annots", Object(page_annots[static_cast<size_t>(p)])},
        };
        doc.set_object(page_refs[static_cast<size_t>(p)], Object(std::move(page)));
        kids.push_back(Object(page_refs[static_cast<size_t>(p)]));
    }

    doc.set_object(pages_ref, Object(Dict{
                                  {"Type", Object(Name{"Pages"})},
                                  {"Kids", Object(std::move(kids))},
                                  {"Count", Object(static_cast<int64_t>(page_count))},
                              }));

    Ref acroform_ref = doc.add_object(Object(Dict{
        {"Fields", Object(std::move(field_refs))},
        {"DA", Object(std::string("/Helv 10 Tf 0 g"))},
        {"DR", Object(Dict{{"Font", Object(Dict{{"Helv", Object(font_ref)}})}})},
    }));

    doc.set_object(catalog_ref, Object(Dict{
                                    {"Type", Object(Name{"Catalog"})},
                                    {"Pages", Object(pages_ref)},
                                    {"AcroForm", Object(acroform_ref)},
                                }));
    doc.trailer()["Root"] = Object(catalog_ref);

    return doc.serialize();
}

using nlohmann::json;

std::string schema_to_json_text(const FormSchema& schema) {
    json fields = json::array();
    for (const FormField& f : schema.fields) {
        json jf{
            {"name", f.name},
            {"raw_name", f.raw_name},
            {"kind", to_string(f.kind)},
            {"page", f.page},
        };
        if (f.kind == FieldKind::Choice) jf["options"] = f.options;
        if (f.max_len) jf["max_len"] = *f.max_len;
        fields.push_back(std::move(jf));
    }
    json out{{"form_digest", schema.form_digest}, {"fields", std::move(fields)}};
    return out.dump(2);
}

FormSchema schema_from_json_text(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("fields") ||
        !parsed["fields"].is_array())
        throw Error::permanent(ErrorKind::Parse, "schema JSON must be an object with a fields array");
    FormSchema schema;
    schema.form_digest = parsed.value("form_digest", "");
    std::set<std::string> seen;
    for (const json& jf : parsed["fields"]) {
        FormField f;
        f.raw_name = jf.value("raw_name", jf.value("name", ""));
        f.name = util::normalize_name(jf.value("name", f.raw_name));
        if (f.name.empty())
            throw Error::permanent(ErrorKind::Parse, "schema field without a name");
        f.kind = field_kind_from_string(jf.value("kind", "text"));
        f.page = jf.value("page", 1);
        if (jf.contains("options")) f.options = jf["options"].get<std::vector<std::string>>();
        if (jf.contains("max_len") && jf["max_len"].is_number())
            f.max_len = jf["max_len"].get<int>();
        if (!seen.insert(f.name).second)
            throw Error::permanent(ErrorKind::Schema, "duplicate field '" + f.name + "' in schema JSON");
        schema.fields.push_back(std::move(f));
    }
    return schema;
}

std::vector<FieldSpec> field_specs_from_json_text(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array())
        throw Error::permanent(ErrorKind::Parse, "form spec must be a JSON array");
    std::vector<FieldSpec> specs;
    for (const json& jf : parsed) {
        if (!jf.is_object() || !jf.contains("name"))
            throw Error::permanent(ErrorKind::Parse, "each form spec entry needs a name");
        FieldSpec spec;
        spec.name = jf["name"].get<std::string>();
        spec.kind = field_kind_from_string(jf.value("kind", "text"));
        if (jf.contains("options")) spec.options = jf["options"].get<std::vector<std::string>>();
        if (jf.contains("max_len") && jf["max_len"].is_number())
            spec.max_len = jf["max_len"].get<int>();
        specs.push_back(std::move(spec));
    }
    return specs;
}

FieldValues field_values_from_json_text(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::Parse, "plan must be a JSON object");
    FieldValues values;
    for (const auto& [key, value] : parsed.items()) {
        std::string name = util::normalize_name(key);
        if (value.is_null())
            values[name] = std::nullopt;
        else if (value.is_string())
            values[name] = value.get<std::string>();
        else
            throw Error::permanent(ErrorKind::Parse,
                                   "plan value for '" + key + "' must be string or null");
    }
    return values;
}

} // namespace mailform::form
