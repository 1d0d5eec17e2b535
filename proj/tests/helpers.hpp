#pragma once

#include "mailform/config.hpp"
#include "mailform/form_model.hpp"
#include "mailform/mime.hpp"
#include "mailform/pdf.hpp"
#include "mailform/util.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

namespace testutil {

inline std::filesystem::path fixtures_dir() { return MAILFORM_FIXTURES_DIR; }

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        char tmpl[] = "/tmp/mailform-test-XXXXXX";
        path = ::mkdtemp(tmpl);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, std::string_view data) {
    mailform::util::atomic_write_file(p, data);
}

// A minimal field-less PDF whose pages show the given lines of text.
inline mailform::Bytes flat_pdf(const std::vector<std::string>& lines) {
    using namespace mailform::pdf;
    Document doc;
    Ref catalog_ref = doc.add_object(Object(Dict{}));
    Ref pages_ref = doc.add_object(Object(Dict{}));
    Ref font_ref = doc.add_object(Object(Dict{
        {"Type", Object(Name{"Font"})},
        {"Subtype", Object(Name{"Type1"})},
        {"BaseFont", Object(Name{"Helvetica"})},
    }));
    std::string content;
    double y = 720;
    for (const std::string& line : lines) {
        std::string escaped;
        for (char c : line) {
            if (c == '(' || c == ')' || c == '\\') escaped.push_back('\\');
            escaped.push_back(c);
        }
        content += "BT /F1 12 Tf 72 " + std::to_string(static_cast<int>(y)) + " Td (" + escaped +
                   ") Tj ET\n";
        y -= 16;
    }
    auto stream = std::make_shared<Stream>();
    stream->data = content;
    stream->dict["Length"] = Object(static_cast<int64_t>(content.size()));
    Ref content_ref = doc.add_object(Object(stream));
    Ref page_ref = doc.add_object(Object(Dict{
        {"Type", Object(Name{"Page"})},
        {"Parent", Object(pages_ref)},
        {"MediaBox", Object(Array{Object(0), Object(0), Object(612.0), Object(792.0)})},
        {"Resources", Object(Dict{{"Font", Object(Dict{{"F1", Object(font_ref)}})}})},
        {"Contents", Object(content_ref)},
    }));
    doc.set_object(pages_ref, Object(Dict{
                                  {"Type", Object(Name{"Pages"})},
                                  {"Kids", Object(Array{Object(page_ref)})},
                                  {"Count", Object(1)},
                              }));
    doc.set_object(catalog_ref, Object(Dict{
                                    {"Type", Object(Name{"Catalog"})},
                                    {"Pages", Object(pages_ref)},
                                }));
    doc.trailer()["Root"] = Object(catalog_ref);
    return doc.serialize();
}

// Arbitrary non-PDF binary payload posing as a PNG scan.
inline mailform::Bytes fake_png(const std::string& seed) {
    std::string bytes = "\x89PNG\r\n\x1a\n";
    bytes += mailform::util::sha256_hex(seed); // arbitrary distinct content
    return bytes;
}

// Serializes a request email carrying the given attachments.
inline mailform::Bytes make_eml(const std::string& message_id, const std::string& subject,
                                const std::string& body,
                                std::vector<mailform::mime::OutgoingAttachment> attachments) {
    mailform::mime::OutgoingMessage msg;
    msg.from_address = "maria.garcia@example.com";
    msg.to_address = "forms@example.com";
    msg.subject = subject;
    msg.message_id = message_id;
    msg.body_text = body;
    msg.attachments = std::move(attachments);
    return mailform::mime::serialize(msg);
}

// Writes the stub-OCR sidecar for an attachment payload.
inline void write_sidecar(const std::filesystem::path& fixtures, const mailform::Bytes& payload,
                          const std::string& text) {
    write_file(fixtures / (mailform::util::sha256_hex(payload) + ".txt"), text);
}

// A config wired entirely inside `root`.
inline mailform::cfg::Config make_config(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    mailform::cfg::Config config;
    config.inbox_dir = root / "inbox";
    config.outbox_dir = root / "outbox";
    config.fixtures_dir = root / "ocr-fixtures";
    config.ledger_path = root / "ledger.jsonl";
    config.cursor_path = root / "cursor.json";
    fs::create_directories(config.inbox_dir);
    fs::create_directories(config.outbox_dir);
    fs::create_directories(config.fixtures_dir);
    return config;
}

} // namespace testutil
