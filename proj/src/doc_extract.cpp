#include "mailform/doc_extract.hpp"

#include "mailform/errors.hpp"
#include "mailform/pdf.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mailform::extract {

using nlohmann::json;

namespace {

std::vector<TextBlock> blocks_from_lines(const std::vector<std::string>& lines) {
    std::vector<TextBlock> blocks;
    size_t n = lines.size();
    for (size_t i = 0; i < n; ++i) {
        TextBlock block;
        block.text = lines[i];
        block.confidence = 1.0;
        block.bbox = Rect{0.0, static_cast<double>(i) / static_cast<double>(n), 1.0,
                          1.0 / static_cast<double>(n)};
        blocks.push_back(std::move(block));
    }
    return blocks;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            if (!current.empty() && current.back() == '\r') current.pop_back();
            if (!current.empty()) lines.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) lines.push_back(current);
    return lines;
}

} // namespace

std::vector<TextBlock> StubOcrBackend::recognize(const ingest::Attachment& attachment) {
    std::string digest = util::sha256_hex(attachment.bytes);
    std::filesystem::path sidecar = fixtures_dir_ / (digest + ".txt");
    std::error_code ec;
    if (!std::filesystem::exists(sidecar, ec))
        return {};
    return blocks_from_lines(split_lines(util::read_file(sidecar)));
}

RemoteOcrBackend::RemoteOcrBackend(std::string base_url, std::string auth_token)
    : base_url_(std::move(base_url)), auth_token_(std::move(auth_token)) {}

std::vector<TextBlock> RemoteOcrBackend::recognize(const ingest::Attachment& attachment) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (!auth_token_.empty())
        headers.emplace("Authorization", "Bearer " + auth_token_);
    auto res = client.Post("/extract", headers, attachment.bytes, attachment.media_type);
    if (!res)
        throw Error::retryable(ErrorKind::Backend,
                               "OCR backend unreachable at " + base_url_ + "/extract");
    if (res->status < 200 || res->status >= 300)
        throw Error::retryable(ErrorKind::Backend,
                               "OCR backend returned status " + std::to_string(res->status));
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("blocks") ||
        !body["blocks"].is_array())
        throw Error::permanent(ErrorKind::Backend,
                               "OCR backend returned malformed response: " + res->body);
    std::vector<TextBlock> blocks;
    for (const json& jb : body["blocks"]) {
        TextBlock block;
        block.text = jb.value("text", "");
        block.confidence = jb.value("confidence", 0.0);
        if (jb.contains("bbox") && jb["bbox"].is_object()) {
            const json& bb = jb["bbox"];
            block.bbox = Rect{bb.value("x", 0.0), bb.value("y", 0.0), bb.value("w", 0.0),
                              bb.value("h", 0.0)};
        }
        blocks.push_back(std::move(block));
    }
    return blocks;
}

void sort_reading_order(std::vector<TextBlock>& blocks) {
    constexpr double kRowBand = 0.02;
    std::stable_sort(blocks.begin(), blocks.end(), [](const TextBlock& a, const TextBlock& b) {
        auto band = [](double y) { return static_cast<long>(std::floor(y / kRowBand)); };
        if (band(a.bbox.y) != band(b.bbox.y)) return band(a.bbox.y) < band(b.bbox.y);
        return a.bbox.x < b.bbox.x;
    });
}

ExtractedDocument extract_text(const ingest::Attachment& attachment, OcrBackend& backend) {
    ExtractedDocument doc;
    doc.source_filename = attachment.filename;

    auto start = std::chrono::steady_clock::now();
    if (attachment.media_type == "application/pdf" ||
        (attachment.bytes.find("%PDF-") != std::string::npos &&
         attachment.bytes.find("%PDF-") <= 1024)) {
        // field-less PDF: use the embedded text layer, no OCR round trip
        pdf::Document parsed = pdf::Document::parse(attachment.bytes);
        doc.blocks = blocks_from_lines(pdf::extract_page_text(parsed));
        doc.backend_name = "pdf-text-layer";
    } else {
        doc.blocks = backend.recognize(attachment);
        doc.backend_name = backend.name();
    }
    sort_reading_order(doc.blocks);
    doc.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return doc;
}

ExtractedDocument filter_blocks(const ExtractedDocument& doc, double min_confidence) {
    if (min_confidence < 0.0 || min_confidence > 1.0)
        throw Error::permanent(ErrorKind::Config, "min_confidence must be within [0,1]");
    ExtractedDocument out = doc;
    out.blocks.clear();
    for (const TextBlock& block : doc.blocks)
        if (block.confidence >= min_confidence)
            out.blocks.push_back(block);
    return out;
}

std::string extracted_to_json_text(const ExtractedDocument& doc) {
    json blocks = json::array();
    for (const TextBlock& block : doc.blocks)
        blocks.push_back(json{
            {"text", block.text},
            {"confidence", block.confidence},
            {"bbox",
             {{"x", block.bbox.x}, {"y", block.bbox.y}, {"w", block.bbox.w}, {"h", block.bbox.h}}},
        });
    json out{
        {"source_filename", doc.source_filename},
        {"backend", doc.backend_name},
        {"elapsed_s", doc.elapsed_s},
        {"blocks", std::move(blocks)},
    };
    return out.dump(2);
}

std::string render_context(const std::vector<ExtractedDocument>& docs) {
    std::vector<std::string> sections;
    for (const ExtractedDocument& doc : docs) {
        std::string section = "=== DOCUMENT: " + doc.source_filename + " ===";
        for (const TextBlock& block : doc.blocks) {
            section += "\n";
            section += block.text;
        }
        sections.push_back(std::move(section));
    }
    return util::join(sections, "\n\n");
}

} // namespace mailform::extract
