#pragma once

#include "mailform/mail_ingest.hpp"
#include "mailform/util.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace mailform::extract {

struct Rect {
    double x = 0, y = 0, w = 0, h = 0; // normalized to [0,1]
};

struct TextBlock {
    std::string text;
    double confidence = 0; // [0,1]
    Rect bbox;
};

struct ExtractedDocument {
    std::string source_filename;
    std::vector<TextBlock> blocks; // reading order: top-to-bottom, left-to-right
    std::string backend_name;
    double elapsed_s = 0;
};

// Pluggable recognizer for image attachments. Implementations are stateless
// per call and safe to use concurrently.
class OcrBackend {
public:
    virtual ~OcrBackend() = default;
    virtual std::string name() const = 0;
    // Returns blocks in backend order; the caller applies reading order.
    virtual std::vector<TextBlock> recognize(const ingest::Attachment& attachment) = 0;
};

// Deterministic test backend: looks up `<fixtures_dir>/<sha256-hex>.txt`,
// one block per line, confidence 1.0, bboxes synthesized as full-width rows.
// No sidecar file means no text.
class StubOcrBackend : public OcrBackend {
public:
    explicit StubOcrBackend(std::filesystem::path fixtures_dir)
        : fixtures_dir_(std::move(fixtures_dir)) {}
    std::string name() const override { return "stub"; }
    std::vector<TextBlock> recognize(const ingest::Attachment& attachment) override;

private:
    std::filesystem::path fixtures_dir_;
};

// HTTP client for a detect-document-text style service:
// POST <base_url>/extract with the raw bytes, response JSON
// {"blocks":[{"text","confidence","bbox":{"x","y","w","h"}}]}.
class RemoteOcrBackend : public OcrBackend {
public:
    RemoteOcrBackend(std::string base_url, std::string auth_token);
    std::string name() const override { return "remote"; }
    std::vector<TextBlock> recognize(const ingest::Attachment& attachment) override;

private:
    std::string base_url_;
    std::string auth_token_;
};

// Turns a context attachment into machine-readable text. Field-less PDFs use
// their embedded text layer directly (confidence 1.0) without touching the
// backend; images go through `backend`. Blocks come back in reading order
// and `elapsed_s` holds the wall-clock cost.
ExtractedDocument extract_text(const ingest::Attachment& attachment, OcrBackend& backend);

// Drops blocks below `min_confidence` (range checked), keeping order.
ExtractedDocument filter_blocks(const ExtractedDocument& doc, double min_confidence);

// Deterministic plain-text rendering: one section per document headed by
// `=== DOCUMENT: <filename> ===`, blocks joined by newlines.
std::string render_context(const std::vector<ExtractedDocument>& docs);

// Sorts by row band (height 0.02 in normalized units) then x.
void sort_reading_order(std::vector<TextBlock>& blocks);

std::string extracted_to_json_text(const ExtractedDocument& doc);

} // namespace mailform::extract
