#include "mailform/mail_ingest.hpp"

#include "mailform/errors.hpp"
#include "mailform/form_model.hpp"
#include "mailform/mime.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace mailform::ingest {

using nlohmann::json;

const char* to_string(AttachmentKind kind) {
    switch (kind) {
    case AttachmentKind::TargetForm: return "target-form";
    case AttachmentKind::ContextDocument: return "context-document";
    case AttachmentKind::Ignored: return "ignored";
    }
    return "ignored";
}

int InboundRequest::target_form_index() const {
    for (size_t i = 0; i < attachments.size(); ++i)
        if (attachments[i].kind == AttachmentKind::TargetForm)
            return static_cast<int>(i);
    return -1;
}

Cursor Cursor::load(const std::filesystem::path& path) {
    Cursor cursor;
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        return cursor;
    Bytes data = util::read_file(path);
    json parsed = json::parse(data, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error::permanent(ErrorKind::Parse, "cursor file " + path.string() + " is not a JSON object");
    for (auto& [key, value] : parsed.items())
        if (value.is_string())
            cursor.seen[key] = value.get<std::string>();
    return cursor;
}

void Cursor::save(const std::filesystem::path& path) const {
    json out = json::object();
    for (const auto& [name, digest] : seen)
        out[name] = digest;
    util::atomic_write_file(path, out.dump(2) + "\n");
}

PollResult poll_inbox(const std::filesystem::path& inbox_dir, const Cursor& cursor) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(inbox_dir, ec))
        throw Error::retryable(ErrorKind::Io, "inbox " + inbox_dir.string() + " is not a readable directory");

    std::vector<std::string> names;
    for (fs::directory_iterator it(inbox_dir, ec), end; it != end && !ec; it.increment(ec)) {
        if (!it->is_regular_file(ec)) continue;
        std::string name = it->path().filename().string();
        if (name.size() > 4 && name.substr(name.size() - 4) == ".eml")
            names.push_back(name);
    }
    if (ec)
        throw Error::retryable(ErrorKind::Io, "cannot enumerate inbox " + inbox_dir.string());
    std::sort(names.begin(), names.end());

    PollResult result;
    result.cursor = cursor;
    for (const std::string& name : names) {
        Bytes bytes;
        try {
            bytes = util::read_file(inbox_dir / name);
        } catch (const Error& e) {
            result.warnings.push_back("skipping unreadable message " + name + ": " + e.what());
            util::log_warn(result.warnings.back());
            continue; // no cursor entry: retried next poll in case it was transient
        }
        std::string digest = util::sha256_hex(bytes);
        auto it = result.cursor.seen.find(name);
        if (it != result.cursor.seen.end() && it->second == digest)
            continue; // already delivered
        if (!mime::looks_like_message(bytes)) {
            result.warnings.push_back("skipping malformed message file " + name);
            util::log_warn(result.warnings.back());
            result.cursor.seen[name] = digest; // don't warn about it forever
            continue;
        }
        result.messages.push_back(PolledMessage{name, std::move(bytes)});
        result.cursor.seen[name] = digest;
    }
    return result;
}

InboundRequest parse_inbound(const Bytes& raw) {
    mime::Message msg = mime::parse(raw);

    InboundRequest req;
    req.message_id = msg.message_id;
    req.message_id_synthesized = msg.message_id_synthesized;
    req.sender = msg.from_address;
    req.subject = msg.subject;
    req.received_at = std::chrono::system_clock::now();
    req.warnings = msg.warnings;

    std::vector<std::string> plain_parts;
    std::vector<std::string> html_parts;
    for (const mime::Part* part : msg.leaf_parts()) {
        if (part->is_attachment()) {
            Attachment att;
            att.filename = part->filename.empty()
                               ? "attachment-" + std::to_string(req.attachments.size() + 1)
                               : part->filename;
            att.media_type = part->media_type;
            att.bytes = part->body;
            att.kind = AttachmentKind::ContextDocument;
            req.attachments.push_back(std::move(att));
        } else if (part->media_type == "text/plain") {
            plain_parts.push_back(part->text);
        } else if (part->media_type == "text/html") {
            html_parts.push_back(part->text);
        }
    }

    if (!plain_parts.empty()) {
        req.instruction_text = util::join(plain_parts, "\n");
    } else if (!html_parts.empty()) {
        std::vector<std::string> stripped;
        for (const std::string& html : html_parts)
            stripped.push_back(mime::strip_html(html));
        req.instruction_text = util::join(stripped, "\n");
    }
    return req;
}

bool accepted_media_type(std::string_view media_type) {
    return media_type == "application/pdf" || media_type == "image/png" ||
           media_type == "image/jpeg" || media_type == "image/tiff";
}

namespace {

bool looks_like_pdf(const Bytes& bytes) {
    return bytes.find("%PDF-") != std::string::npos &&
           bytes.find("%PDF-") <= 1024;
}

AttachmentKind classify_one(const std::string& media_type, const Bytes& bytes) {
    std::string mt = media_type;
    // some mailers label PDFs application/octet-stream; sniff the magic
    if (!accepted_media_type(mt) && looks_like_pdf(bytes))
        mt = "application/pdf";
    if (!accepted_media_type(mt))
        return AttachmentKind::Ignored;
    if (mt != "application/pdf")
        return AttachmentKind::ContextDocument;
    try {
        form::FormSchema schema = form::read_schema(bytes);
        return schema.empty() ? AttachmentKind::ContextDocument : AttachmentKind::TargetForm;
    } catch (const Error&) {
        // claims to be a PDF but does not parse: treat as context for OCR
        return AttachmentKind::ContextDocument;
    }
}

} // namespace

InboundRequest classify_attachments(InboundRequest request) {
    for (Attachment& att : request.attachments)
        att.kind = classify_one(att.media_type, att.bytes);
    int first_target = -1;
    for (size_t i = 0; i < request.attachments.size(); ++i) {
        if (request.attachments[i].kind != AttachmentKind::TargetForm) continue;
        if (first_target < 0) {
            first_target = static_cast<int>(i);
        } else {
            request.warnings.push_back(
                "multiple fillable forms attached; only '" +
                request.attachments[static_cast<size_t>(first_target)].filename +
                "' is processed, '" + request.attachments[i].filename + "' is ignored");
        }
    }
    request.classified = true;
    request.no_target_form = (first_target < 0);
    return request;
}

} // namespace mailform::ingest
