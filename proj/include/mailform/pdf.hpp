#pragma once

#include "mailform/util.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Minimal PDF object model, parser and writer. Covers what interactive-form
// work needs: the full object syntax, classic cross-reference tables with a
// whole-file scan fallback, FlateDecode streams, and a deterministic
// full-rewrite serializer. Object streams and encryption are not supported.
namespace mailform::pdf {

struct Object;

struct Name {
    std::string value; // without the leading '/'
    auto operator<=>(const Name&) const = default;
};

struct Ref {
    int num = 0;
    int gen = 0;
    auto operator<=>(const Ref&) const = default;
};

using Array = std::vector<Object>;
using Dict = std::map<std::string, Object>; // keys are names without '/'

struct Stream {
    Dict dict;
    Bytes data; // raw (still encoded) bytes as stored in the file
};

struct Object {
    using Value = std::variant<std::monostate, bool, int64_t, double, std::string, Name,
                               Array, Dict, std::shared_ptr<Stream>, Ref>;
    Value value;

    Object() = default;
    Object(bool b) : value(b) {}
    Object(int64_t n) : value(n) {}
    Object(int n) : value(static_cast<int64_t>(n)) {}
    Object(double d) : value(d) {}
    Object(std::string s) : value(std::move(s)) {}
    Object(const char* s) : value(std::string(s)) {}
    Object(Name n) : value(std::move(n)) {}
    Object(Array a) : value(std::move(a)) {}
    Object(Dict d) : value(std::move(d)) {}
    Object(std::shared_ptr<Stream> s) : value(std::move(s)) {}
    Object(Ref r) : value(r) {}

    bool is_null() const { return std::holds_alternative<std::monostate>(value); }
    bool is_bool() const { return std::holds_alternative<bool>(value); }
    bool is_int() const { return std::holds_alternative<int64_t>(value); }
    bool is_real() const { return std::holds_alternative<double>(value); }
    bool is_number() const { return is_int() || is_real(); }
    bool is_string() const { return std::holds_alternative<std::string>(value); }
    bool is_name() const { return std::holds_alternative<Name>(value); }
    bool is_array() const { return std::holds_alternative<Array>(value); }
    bool is_dict() const { return std::holds_alternative<Dict>(value); }
    bool is_stream() const { return std::holds_alternative<std::shared_ptr<Stream>>(value); }
    bool is_ref() const { return std::holds_alternative<Ref>(value); }

    int64_t as_int() const { return std::get<int64_t>(value); }
    double as_number() const { return is_int() ? static_cast<double>(as_int()) : std::get<double>(value); }
    const std::string& as_string() const { return std::get<std::string>(value); }
    const Name& as_name() const { return std::get<Name>(value); }
    const Array& as_array() const { return std::get<Array>(value); }
    Array& as_array() { return std::get<Array>(value); }
    const Dict& as_dict() const;
    Dict& as_dict();
    const Stream& as_stream() const { return *std::get<std::shared_ptr<Stream>>(value); }
    Stream& as_stream() { return *std::get<std::shared_ptr<Stream>>(value); }
    Ref as_ref() const { return std::get<Ref>(value); }
};

// Parsed document: object table plus trailer. Mutating the table and
// re-serializing performs a full rewrite with a fresh xref.
class Document {
public:
    // Throws Error(Format) when the bytes are not a PDF.
    static Document parse(const Bytes& bytes);

    Bytes serialize() const;

    // Follows a reference chain until a non-reference is reached. Returns a
    // null object for dangling references.
    const Object& resolve(const Object& obj) const;
    const Object* find(Ref ref) const;
    Object* find_mut(Ref ref);

    // Dict lookup with reference resolution; nullptr when the key is absent.
    const Object* dict_get(const Dict& dict, const std::string& key) const;

    Ref add_object(Object obj);
    void set_object(Ref ref, Object obj);

    const Dict& trailer() const { return trailer_; }
    Dict& trailer() { return trailer_; }

    // The catalog (trailer /Root), or nullptr when absent.
    const Object* catalog() const;

    // Page object refs in document order.
    std::vector<Ref> pages() const;

    // Decoded content of a stream (FlateDecode applied when present).
    // Unsupported filters yield std::nullopt.
    std::optional<Bytes> decoded_stream(const Stream& stream) const;

private:
    std::map<int, Object> objects_;
    Dict trailer_;
    int next_num_ = 1;

    void collect_pages(const Object& node, std::vector<Ref>& out, int depth) const;
};

// Decodes a PDF text string (UTF-16BE with BOM, or byte string treated as
// Latin-1, which covers PDFDocEncoding's printable range) to UTF-8.
std::string text_string_to_utf8(const std::string& s);

// Encodes UTF-8 as a PDF text string: ASCII stays literal, anything else
// becomes UTF-16BE with BOM.
std::string utf8_to_text_string(const std::string& s);

// Visible text of every page, one string per text block (BT..ET group).
// Best-effort: literal/hex strings shown via Tj/TJ/'/"; simple fonts only.
std::vector<std::string> extract_page_text(const Document& doc);

// zlib helpers used for FlateDecode streams.
Bytes zlib_inflate(const Bytes& data);
Bytes zlib_deflate(const Bytes& data);

} // namespace mailform::pdf
