#pragma once

#include "mailform/util.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mailform::ingest {

enum class AttachmentKind { TargetForm, ContextDocument, Ignored };

const char* to_string(AttachmentKind kind);

struct Attachment {
    std::string filename;
    std::string media_type; // lowercased MIME type
    Bytes bytes;
    AttachmentKind kind = AttachmentKind::ContextDocument;
};

struct InboundRequest {
    std::string message_id;
    bool message_id_synthesized = false;
    std::string sender;
    std::string subject;
    std::string instruction_text;
    std::vector<Attachment> attachments; // MIME part order
    std::chrono::system_clock::time_point received_at;
    bool classified = false;
    bool no_target_form = false; // set by classify_attachments
    std::vector<std::string> warnings;

    // Index of the first TargetForm attachment, or -1.
    int target_form_index() const;
};

// Tracks which inbox files have been delivered: filename → content digest.
// Persisted as JSON, written atomically. A file that reappears with new
// content counts as new mail.
struct Cursor {
    std::map<std::string, std::string> seen;

    static Cursor load(const std::filesystem::path& path); // missing file → empty cursor
    void save(const std::filesystem::path& path) const;
};

struct PolledMessage {
    std::string filename;
    Bytes bytes;
};

struct PollResult {
    std::vector<PolledMessage> messages; // filename order
    Cursor cursor;                       // updated
    std::vector<std::string> warnings;   // skipped unreadable files
};

// Enumerates `.eml` files under `inbox_dir` that the cursor has not seen.
// Unreadable or structurally invalid files are skipped with a warning; a
// missing or unreadable directory raises a retryable Error(Io).
PollResult poll_inbox(const std::filesystem::path& inbox_dir, const Cursor& cursor);

// Parses raw RFC 5322/MIME bytes into a request. Attachment kinds start as
// ContextDocument; classify_attachments assigns the real ones.
InboundRequest parse_inbound(const Bytes& raw);

// Assigns attachment kinds: PDFs with interactive fields become TargetForm,
// accepted image types and flat PDFs ContextDocument, everything else
// Ignored. Sets no_target_form when no fillable PDF is present. Pure:
// depends only on (media_type, payload).
InboundRequest classify_attachments(InboundRequest request);

// The media types the OCR contract accepts.
bool accepted_media_type(std::string_view media_type);

} // namespace mailform::ingest
