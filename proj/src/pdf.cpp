#include "mailform/pdf.hpp"

#include "mailform/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <sstream>

namespace mailform::pdf {

namespace {

bool is_ws(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\0';
}
bool is_delim(char c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' ||
           c == '{' || c == '}' || c == '/' || c == '%';
}
bool is_regular(char c) { return !is_ws(c) && !is_delim(c); }

int hexval(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Recursive-descent reader over the raw bytes.
class Lexer {
public:
    Lexer(const Bytes& data, size_t pos) : data_(data), pos_(pos) {}

    size_t pos() const { return pos_; }
    void seek(size_t pos) { pos_ = pos; }
    bool eof() const { return pos_ >= data_.size(); }

    void skip_ws() {
        while (pos_ < data_.size()) {
            char c = data_[pos_];
            if (is_ws(c)) {
                ++pos_;
            } else if (c == '%') {
                while (pos_ < data_.size() && data_[pos_] != '\n' && data_[pos_] != '\r')
                    ++pos_;
            } else {
                break;
            }
        }
    }

    // Next run of regular characters (keyword or number).
    std::string keyword() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < data_.size() && is_regular(data_[pos_]))
            ++pos_;
        return data_.substr(start, pos_ - start);
    }

    char peek() {
        skip_ws();
        return eof() ? '\0' : data_[pos_];
    }

    bool starts_with(std::string_view s) {
        skip_ws();
        return data_.compare(pos_, s.size(), s) == 0;
    }

    Object parse_object() {
        skip_ws();
        if (eof())
            throw Error::permanent(ErrorKind::Format, "unexpected end of PDF data");
        char c = data_[pos_];
        if (c == '/') return parse_name();
        if (c == '(') return parse_literal_string();
        if (c == '<') {
            if (pos_ + 1 < data_.size() && data_[pos_ + 1] == '<') return parse_dict_or_stream();
            return parse_hex_string();
        }
        if (c == '[') return parse_array();
        if (c == '+' || c == '-' || c == '.' || (c >= '0' && c <= '9')) return parse_number_or_ref();
        std::string kw = keyword();
        if (kw == "true") return Object(true);
        if (kw == "false") return Object(false);
        if (kw == "null") return Object();
        throw Error::permanent(ErrorKind::Format, "unexpected PDF token '" + kw + "'");
    }

    Object parse_name() {
        ++pos_; // '/'
        std::string name;
        while (pos_ < data_.size() && is_regular(data_[pos_])) {
            char c = data_[pos_];
            if (c == '#' && pos_ + 2 < data_.size()) {
                int hi = hexval(data_[pos_ + 1]);
                int lo = hexval(data_[pos_ + 2]);
                if (hi >= 0 && lo >= 0) {
                    name.push_back(static_cast<char>((hi << 4) | lo));
                    pos_ += 3;
                    continue;
                }
            }
            name.push_back(c);
            ++pos_;
        }
        return Object(Name{std::move(name)});
    }

    Object parse_literal_string() {
        ++pos_; // '('
        std::string out;
        int depth = 1;
        while (pos_ < data_.size()) {
            char c = data_[pos_++];
            if (c == '\\') {
                if (pos_ >= data_.size()) break;
                char e = data_[pos_++];
                switch (e) {
                case 'n': out.push_back('\n'); break;
                case 'r': out.push_back('\r'); break;
                case 't': out.push_back('\t'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case '(': out.push_back('('); break;
                case ')': out.push_back(')'); break;
                case '\\': out.push_back('\\'); break;
                case '\r':
                    if (pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
                    break; // line continuation
                case '\n': break;
                default:
                    if (e >= '0' && e <= '7') {
                        int v = e - '0';
                        for (int k = 0; k < 2 && pos_ < data_.size() && data_[pos_] >= '0' && data_[pos_] <= '7'; ++k)
                            v = v * 8 + (data_[pos_++] - '0');
                        out.push_back(static_cast<char>(v & 0xff));
                    } else {
                        out.push_back(e);
                    }
                }
            } else if (c == '(') {
                ++depth;
                out.push_back(c);
            } else if (c == ')') {
                if (--depth == 0) return Object(std::move(out));
                out.push_back(c);
            } else {
                out.push_back(c);
            }
        }
        throw Error::permanent(ErrorKind::Format, "unterminated PDF string");
    }

    Object parse_hex_string() {
        ++pos_; // '<'
        std::string out;
        int hi = -1;
        while (pos_ < data_.size()) {
            char c = data_[pos_++];
            if (c == '>') {
                if (hi >= 0) out.push_back(static_cast<char>(hi << 4));
                return Object(std::move(out));
            }
            int v = hexval(c);
            if (v < 0) continue;
            if (hi < 0) {
                hi = v;
            } else {
                out.push_back(static_cast<char>((hi << 4) | v));
                hi = -1;
            }
        }
        throw Error::permanent(ErrorKind::Format, "unterminated hex string");
    }

    Object parse_array() {
        ++pos_; // '['
        Array arr;
        while (true) {
            skip_ws();
            if (eof())
                throw Error::permanent(ErrorKind::Format, "unterminated array");
            if (data_[pos_] == ']') {
                ++pos_;
                return Object(std::move(arr));
            }
            arr.push_back(parse_object());
        }
    }

    Object parse_dict_or_stream() {
        pos_ += 2; // '<<'
        Dict dict;
        while (true) {
            skip_ws();
            if (eof())
                throw Error::permanent(ErrorKind::Format, "unterminated dictionary");
            if (data_.compare(pos_, 2, ">>") == 0) {
                pos_ += 2;
                break;
            }
            if (data_[pos_] != '/')
                throw Error::permanent(ErrorKind::Format, "dictionary key is not a name");
            Object key = parse_name();
            Object val = parse_object();
            dict[key.as_name().value] = std::move(val);
        }
        // stream?
        size_t save = pos_;
        skip_ws();
        if (data_.compare(pos_, 6, "stream") == 0) {
            pos_ += 6;
            if (pos_ < data_.size() && data_[pos_] == '\r') ++pos_;
            if (pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
            size_t data_start = pos_;
            size_t data_end = std::string::npos;
            auto len_it = dict.find("Length");
            if (len_it != dict.end() && len_it->second.is_int()) {
                size_t len = static_cast<size_t>(len_it->second.as_int());
                if (data_start + len <= data_.size()) {
                    size_t after = data_start + len;
                    // verify endstream follows (allowing EOL)
                    size_t probe = after;
                    while (probe < data_.size() && is_ws(data_[probe])) ++probe;
                    if (data_.compare(probe, 9, "endstream") == 0)
                        data_end = after;
                }
            }
            if (data_end == std::string::npos) {
                // indirect or wrong /Length: search for the terminator
                size_t found = data_.find("endstream", data_start);
                if (found == std::string::npos)
                    throw Error::permanent(ErrorKind::Format, "unterminated stream");
                data_end = found;
                while (data_end > data_start &&
                       (data_[data_end - 1] == '\n' || data_[data_end - 1] == '\r'))
                    --data_end;
            }
            auto stream = std::make_shared<Stream>();
            stream->data = data_.substr(data_start, data_end - data_start);
            stream->dict = std::move(dict);
            stream->dict["Length"] = Object(static_cast<int64_t>(stream->data.size()));
            size_t es = data_.find("endstream", data_end);
            pos_ = (es == std::string::npos) ? data_.size() : es + 9;
            return Object(std::move(stream));
        }
        pos_ = save;
        return Object(std::move(dict));
    }

    Object parse_number_or_ref() {
        size_t save = pos_;
        std::string first = keyword();
        bool first_is_uint = !first.empty() &&
                             std::all_of(first.begin(), first.end(), [](char c) { return c >= '0' && c <= '9'; });
        if (first_is_uint) {
            size_t after_first = pos_;
            skip_ws();
            size_t second_start = pos_;
            std::string second = keyword();
            bool second_is_uint = !second.empty() &&
                                  std::all_of(second.begin(), second.end(), [](char c) { return c >= '0' && c <= '9'; });
            if (second_is_uint) {
                skip_ws();
                if (pos_ < data_.size() && data_[pos_] == 'R' &&
                    (pos_ + 1 >= data_.size() || !is_regular(data_[pos_ + 1]))) {
                    ++pos_;
                    return Object(Ref{std::stoi(first), std::stoi(second)});
                }
            }
            pos_ = after_first;
            (void)second_start;
            return Object(static_cast<int64_t>(std::stoll(first)));
        }
        pos_ = save;
        std::string num = keyword();
        if (num.find('.') != std::string::npos)
            return Object(std::stod(num));
        try {
            return Object(static_cast<int64_t>(std::stoll(num)));
        } catch (...) {
            throw Error::permanent(ErrorKind::Format, "bad PDF number '" + num + "'");
        }
    }

private:
    const Bytes& data_;
    size_t pos_;
};

void write_string_escaped(std::string& out, const std::string& s) {
    out.push_back('(');
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        switch (c) {
        case '(': out += "\\("; break;
        case ')': out += "\\)"; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        default:
            if (c < 32) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\%03o", c);
                out += buf;
            } else {
                out.push_back(ch);
            }
        }
    }
    out.push_back(')');
}

void write_name_escaped(std::string& out, const std::string& name) {
    out.push_back('/');
    for (char ch : name) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (c <= 32 || c > 126 || is_delim(ch) || ch == '#') {
            char buf[8];
            std::snprintf(buf, sizeof buf, "#%02X", c);
            out += buf;
        } else {
            out.push_back(ch);
        }
    }
}

std::string format_real(double d) {
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e15)
        return std::to_string(static_cast<long long>(d));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", d);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

void write_object(std::string& out, const Object& obj) {
    if (obj.is_null()) { out += "null"; return; }
    if (obj.is_bool()) { out += std::get<bool>(obj.value) ? "true" : "false"; return; }
    if (obj.is_int()) { out += std::to_string(obj.as_int()); return; }
    if (obj.is_real()) { out += format_real(std::get<double>(obj.value)); return; }
    if (obj.is_string()) { write_string_escaped(out, obj.as_string()); return; }
    if (obj.is_name()) { write_name_escaped(out, obj.as_name().value); return; }
    if (obj.is_ref()) {
        out += std::to_string(obj.as_ref().num) + " 0 R";
        return;
    }
    if (obj.is_array()) {
        out.push_back('[');
        bool first = true;
        for (const Object& el : obj.as_array()) {
            if (!first) out.push_back(' ');
            first = false;
            write_object(out, el);
        }
        out.push_back(']');
        return;
    }
    if (obj.is_dict() || obj.is_stream()) {
        const Dict& dict = obj.is_dict() ? obj.as_dict() : obj.as_stream().dict;
        out += "<<";
        for (const auto& [key, val] : dict) {
            out.push_back(' ');
            write_name_escaped(out, key);
            out.push_back(' ');
            write_object(out, val);
        }
        out += " >>";
        if (obj.is_stream()) {
            const Stream& s = obj.as_stream();
            out += "\nstream\n";
            out += s.data;
            out += "\nendstream";
        }
        return;
    }
}

} // namespace

const Dict& Object::as_dict() const {
    if (is_stream()) return as_stream().dict;
    return std::get<Dict>(value);
}
Dict& Object::as_dict() {
    if (is_stream()) return as_stream().dict;
    return std::get<Dict>(value);
}

Document Document::parse(const Bytes& bytes) {
    size_t header = bytes.find("%PDF-");
    if (header == std::string::npos || header > 1024)
        throw Error::permanent(ErrorKind::Format, "not a PDF: missing %PDF header");

    Document doc;

    // Whole-file scan for "N G obj". Later definitions override earlier ones,
    // which matches incremental-update semantics. Regions inside stream data
    // are skipped because the lexer consumes streams as units.
    std::vector<std::pair<size_t, size_t>> object_spans; // [start, end)
    size_t pos = 0;
    while (pos < bytes.size()) {
        size_t obj_kw = bytes.find("obj", pos);
        if (obj_kw == std::string::npos) break;
        // must be a standalone keyword
        if (obj_kw + 3 < bytes.size() && is_regular(bytes[obj_kw + 3])) {
            pos = obj_kw + 3;
            continue;
        }
        // walk back across "G num" whitespace-digits-whitespace-digits
        size_t p = obj_kw;
        auto skip_back_ws = [&](size_t q) {
            while (q > 0 && is_ws(bytes[q - 1])) --q;
            return q;
        };
        auto skip_back_digits = [&](size_t q) {
            size_t start = q;
            while (q > 0 && bytes[q - 1] >= '0' && bytes[q - 1] <= '9') --q;
            return (q < start) ? q : std::string::npos;
        };
        size_t q = skip_back_ws(p);
        size_t gen_end = q;
        q = skip_back_digits(q);
        if (q == std::string::npos || q == gen_end) {
            pos = obj_kw + 3;
            continue;
        }
        size_t gen_start = q;
        q = skip_back_ws(q);
        if (q == gen_start) { // need whitespace between num and gen
            pos = obj_kw + 3;
            continue;
        }
        size_t num_end = q;
        q = skip_back_digits(q);
        if (q == std::string::npos) {
            pos = obj_kw + 3;
            continue;
        }
        size_t num_start = q;
        if (num_start > 0 && is_regular(bytes[num_start - 1])) {
            pos = obj_kw + 3;
            continue;
        }
        // skip matches that fall inside a previously-consumed stream
        bool inside = false;
        for (const auto& [s, e] : object_spans)
            if (num_start >= s && num_start < e) { inside = true; break; }
        if (inside) {
            pos = obj_kw + 3;
            continue;
        }

        int num = std::stoi(bytes.substr(num_start, num_end - num_start));
        int gen = std::stoi(bytes.substr(gen_start, gen_end - gen_start));
        (void)gen;
        Lexer lex(bytes, obj_kw + 3);
        try {
            Object obj = lex.parse_object();
            doc.objects_[num] = std::move(obj);
            object_spans.emplace_back(num_start, lex.pos());
            pos = lex.pos();
        } catch (const Error&) {
            pos = obj_kw + 3; // tolerate one bad object, keep scanning
        }
    }

    if (doc.objects_.empty())
        throw Error::permanent(ErrorKind::Format, "not a PDF: no objects found");

    // Trailer dictionaries, later ones (newer updates) overriding earlier.
    pos = 0;
    while (pos < bytes.size()) {
        size_t t = bytes.find("trailer", pos);
        if (t == std::string::npos) break;
        bool inside = false;
        for (const auto& [s, e] : object_spans)
            if (t >= s && t < e) { inside = true; break; }
        if (!inside) {
            Lexer lex(bytes, t + 7);
            try {
                Object obj = lex.parse_object();
                if (obj.is_dict())
                    for (auto& [k, v] : obj.as_dict())
                        doc.trailer_[k] = v;
            } catch (const Error&) {
            }
        }
        pos = t + 7;
    }
    // Cross-reference-stream files keep trailer keys in the XRef stream dict.
    if (doc.trailer_.find("Root") == doc.trailer_.end()) {
        for (const auto& [num, obj] : doc.objects_) {
            if (!obj.is_stream()) continue;
            const Dict& d = obj.as_dict();
            auto it = d.find("Type");
            if (it != d.end() && it->second.is_name() && it->second.as_name().value == "XRef")
                for (const auto& [k, v] : d)
                    if (k == "Root" || k == "Info" || k == "ID") doc.trailer_[k] = v;
        }
    }
    // Last resort: locate the catalog directly.
    if (doc.trailer_.find("Root") == doc.trailer_.end()) {
        for (const auto& [num, obj] : doc.objects_) {
            if (!obj.is_dict() || obj.is_stream()) continue;
            const Dict& d = obj.as_dict();
            auto it = d.find("Type");
            if (it != d.end() && it->second.is_name() && it->second.as_name().value == "Catalog") {
                doc.trailer_["Root"] = Object(Ref{num, 0});
                break;
            }
        }
    }

    doc.next_num_ = doc.objects_.empty() ? 1 : doc.objects_.rbegin()->first + 1;
    return doc;
}

Bytes Document::serialize() const {
    std::string out = "%PDF-1.6\n%\xe2\xe3\xcf\xd3\n";
    std::map<int, size_t> offsets;
    for (const auto& [num, obj] : objects_) {
        offsets[num] = out.size();
        out += std::to_string(num) + " 0 obj\n";
        write_object(out, obj);
        out += "\nendobj\n";
    }
    size_t xref_pos = out.size();
    out += "xref\n";
    // subsections over contiguous runs; entry 0 is the free-list head
    std::vector<std::pair<int, size_t>> entries;
    entries.emplace_back(0, 0);
    for (const auto& [num, off] : offsets)
        entries.emplace_back(num, off);
    size_t i = 0;
    while (i < entries.size()) {
        size_t j = i;
        while (j + 1 < entries.size() && entries[j + 1].first == entries[j].first + 1)
            ++j;
        out += std::to_string(entries[i].first) + " " + std::to_string(j - i + 1) + "\n";
        for (size_t k = i; k <= j; ++k) {
            char buf[32];
            if (entries[k].first == 0)
                std::snprintf(buf, sizeof buf, "%010d %05d f \n", 0, 65535);
            else
                std::snprintf(buf, sizeof buf, "%010zu %05d n \n", entries[k].second, 0);
            out += buf;
        }
        i = j + 1;
    }
    out += "trailer\n";
    Dict trailer = trailer_;
    trailer["Size"] = Object(static_cast<int64_t>(objects_.empty() ? 1 : objects_.rbegin()->first + 1));
    trailer.erase("Prev");
    trailer.erase("XRefStm");
    std::string tdict;
    write_object(tdict, Object(trailer));
    out += tdict;
    out += "\nstartxref\n" + std::to_string(xref_pos) + "\n%%EOF\n";
    return out;
}

const Object& Document::resolve(const Object& obj) const {
    static const Object null_obj;
    const Object* cur = &obj;
    int guard = 0;
    while (cur->is_ref()) {
        if (++guard > 64) return null_obj;
        const Object* next = find(cur->as_ref());
        if (!next) return null_obj;
        cur = next;
    }
    return *cur;
}

const Object* Document::find(Ref ref) const {
    auto it = objects_.find(ref.num);
    return it == objects_.end() ? nullptr : &it->second;
}

Object* Document::find_mut(Ref ref) {
    auto it = objects_.find(ref.num);
    return it == objects_.end() ? nullptr : &it->second;
}

const Object* Document::dict_get(const Dict& dict, const std::string& key) const {
    auto it = dict.find(key);
    if (it == dict.end()) return nullptr;
    return &resolve(it->second);
}

Ref Document::add_object(Object obj) {
    int num = next_num_++;
    objects_[num] = std::move(obj);
    return Ref{num, 0};
}

void Document::set_object(Ref ref, Object obj) {
    objects_[ref.num] = std::move(obj);
    next_num_ = std::max(next_num_, ref.num + 1);
}

const Object* Document::catalog() const {
    auto it = trailer_.find("Root");
    if (it == trailer_.end()) return nullptr;
    const Object& root = resolve(it->second);
    return root.is_dict() ? &root : nullptr;
}

void Document::collect_pages(const Object& node, std::vector<Ref>& out, int depth) const {
    if (depth > 64 || !node.is_ref()) return;
    const Object& resolved = resolve(node);
    if (!resolved.is_dict()) return;
    const Dict& d = resolved.as_dict();
    const Object* type = dict_get(d, "Type");
    if (type && type->is_name() && type->as_name().value == "Page") {
        out.push_back(node.as_ref());
        return;
    }
    const Object* kids = dict_get(d, "Kids");
    if (kids && kids->is_array())
        for (const Object& kid : kids->as_array())
            collect_pages(kid, out, depth + 1);
}

std::vector<Ref> Document::pages() const {
    std::vector<Ref> out;
    const Object* cat = catalog();
    if (!cat) return out;
    auto it = cat->as_dict().find("Pages");
    if (it == cat->as_dict().end()) return out;
    collect_pages(it->second, out, 0);
    return out;
}

std::optional<Bytes> Document::decoded_stream(const Stream& stream) const {
    auto it = stream.dict.find("Filter");
    if (it == stream.dict.end()) return stream.data;
    const Object& filter = resolve(it->second);
    auto apply = [&](const Name& name, const Bytes& data) -> std::optional<Bytes> {
        if (name.value == "FlateDecode") {
            // predictors (DecodeParms) are not supported
            auto parms = stream.dict.find("DecodeParms");
            if (parms != stream.dict.end() && !resolve(parms->second).is_null())
                return std::nullopt;
            try {
                return zlib_inflate(data);
            } catch (const Error&) {
                return std::nullopt;
            }
        }
        return std::nullopt;
    };
    if (filter.is_name()) return apply(filter.as_name(), stream.data);
    if (filter.is_array()) {
        Bytes cur = stream.data;
        for (const Object& f : filter.as_array()) {
            const Object& fr = resolve(f);
            if (!fr.is_name()) return std::nullopt;
            auto next = apply(fr.as_name(), cur);
            if (!next) return std::nullopt;
            cur = std::move(*next);
        }
        return cur;
    }
    return std::nullopt;
}

std::string text_string_to_utf8(const std::string& s) {
    if (s.size() >= 2 && static_cast<unsigned char>(s[0]) == 0xfe &&
        static_cast<unsigned char>(s[1]) == 0xff)
        return util::utf16be_to_utf8(s);
    bool ascii = std::all_of(s.begin(), s.end(),
                             [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    return ascii ? s : util::latin1_to_utf8(s);
}

std::string utf8_to_text_string(const std::string& s) {
    bool ascii = std::all_of(s.begin(), s.end(),
                             [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    return ascii ? s : util::utf8_to_utf16be(s);
}

std::vector<std::string> extract_page_text(const Document& doc) {
    std::vector<std::string> blocks;
    for (Ref page_ref : doc.pages()) {
        const Object* page = doc.find(page_ref);
        if (!page || !page->is_dict()) continue;
        const Object* contents = doc.dict_get(page->as_dict(), "Contents");
        if (!contents) continue;
        Bytes content;
        auto append_stream = [&](const Object& o) {
            const Object& r = doc.resolve(o);
            if (r.is_stream()) {
                auto data = doc.decoded_stream(r.as_stream());
                if (data) {
                    content += *data;
                    content += "\n";
                }
            }
        };
        if (contents->is_array())
            for (const Object& el : contents->as_array()) append_stream(el);
        else
            append_stream(*contents);

        // Walk the content stream collecting shown strings between BT/ET.
        Lexer lex(content, 0);
        bool in_text = false;
        std::string block;
        std::vector<std::string> pieces;
        auto flush_block = [&] {
            std::string text = util::join(pieces, "\n");
            if (!text.empty()) blocks.push_back(text);
            pieces.clear();
            block.clear();
        };
        std::vector<Object> operands;
        while (!lex.eof()) {
            lex.skip_ws();
            if (lex.eof()) break;
            char c = lex.peek();
            if (c == '/' || c == '(' || c == '<' || c == '[' || c == '+' || c == '-' ||
                c == '.' || (c >= '0' && c <= '9')) {
                try {
                    operands.push_back(lex.parse_object());
                } catch (const Error&) {
                    break;
                }
                continue;
            }
            std::string op = lex.keyword();
            if (op.empty()) break;
            if (op == "BT") {
                in_text = true;
                block.clear();
            } else if (op == "ET") {
                if (!block.empty()) pieces.push_back(block);
                block.clear();
                in_text = false;
            } else if (in_text && (op == "Tj" || op == "'" || op == "\"")) {
                if (op != "Tj" && !block.empty()) {
                    pieces.push_back(block);
                    block.clear();
                }
                if (!operands.empty() && operands.back().is_string())
                    block += text_string_to_utf8(operands.back().as_string());
            } else if (in_text && op == "TJ") {
                if (!operands.empty() && operands.back().is_array())
                    for (const Object& el : operands.back().as_array())
                        if (el.is_string()) block += text_string_to_utf8(el.as_string());
            } else if (in_text && (op == "Td" || op == "TD" || op == "T*" || op == "Tm")) {
                if (!block.empty()) {
                    pieces.push_back(block);
                    block.clear();
                }
            }
            operands.clear();
        }
        if (!block.empty()) pieces.push_back(block);
        flush_block();
    }
    return blocks;
}

Bytes zlib_inflate(const Bytes& data) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK)
        throw Error::permanent(ErrorKind::Format, "zlib init failed");
    Bytes out;
    out.reserve(data.size() * 4);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    char buf[16384];
    int rc;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error::permanent(ErrorKind::Format, "zlib inflate failed");
        }
        out.append(buf, sizeof buf - zs.avail_out);
    } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
    inflateEnd(&zs);
    return out;
}

Bytes zlib_deflate(const Bytes& data) {
    z_stream zs{};
    if (deflateInit(&zs, Z_DEFAULT_COMPRESSION) != Z_OK)
        throw Error::permanent(ErrorKind::Format, "zlib init failed");
    Bytes out;
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    char buf[16384];
    int rc;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof buf;
        rc = deflate(&zs, Z_FINISH);
        out.append(buf, sizeof buf - zs.avail_out);
    } while (rc != Z_STREAM_END);
    deflateEnd(&zs);
    return out;
}

} // namespace mailform::pdf
