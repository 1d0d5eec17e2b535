#include "mailform/reply_compose.hpp"

#include "mailform/errors.hpp"
#include "mailform/mime.hpp"

#include <sstream>

namespace mailform::reply {

std::string reply_message_id(const std::string& request_message_id) {
    return "reply-" + util::sha256_hex(request_message_id).substr(0, 20) + "@mailform.local";
}

namespace {

std::string reply_subject(const std::string& original) {
    if (original.rfind("Re: ", 0) == 0) return original;
    return "Re: " + original;
}

mime::OutgoingMessage base_message(const ingest::InboundRequest& request,
                                   const std::string& from_address) {
    mime::OutgoingMessage msg;
    msg.from_address = from_address;
    msg.to_address = request.sender;
    msg.subject = reply_subject(request.subject);
    msg.message_id = reply_message_id(request.message_id);
    msg.in_reply_to = request.message_id;
    return msg;
}

OutboundReply to_outbound(const mime::OutgoingMessage& msg) {
    OutboundReply out;
    out.message_id = msg.message_id;
    out.in_reply_to = msg.in_reply_to;
    out.to = msg.to_address;
    out.subject = msg.subject;
    out.body_text = msg.body_text;
    if (!msg.attachments.empty()) {
        out.attachment_filename = msg.attachments.front().filename;
        out.attachment_bytes = msg.attachments.front().bytes;
    }
    return out;
}

} // namespace

ComposedReply compose_reply(const ingest::InboundRequest& request, const form::FilledForm& filled,
                            const plan::CompletionPlan& plan, const std::string& from_address) {
    std::ostringstream body;
    body << "Hello,\n\n"
         << "the attached form has been completed automatically.\n\n"
         << "  Fields filled: " << filled.applied.size() << "\n"
         << "  Fields left blank (insufficient information): " << plan.blank_fields().size()
         << "\n"
         << "  Fields skipped: " << filled.skipped.size() << "\n";
    for (const auto& [name, reason] : filled.skipped)
        body << "    - " << name << ": " << reason << "\n";
    if (!filled.notes.empty()) {
        body << "\nNotes:\n";
        for (const std::string& note : filled.notes)
            body << "  - " << note << "\n";
    }
    std::vector<std::string> warnings = request.warnings;
    warnings.insert(warnings.end(), plan.warnings.begin(), plan.warnings.end());
    if (!warnings.empty()) {
        body << "\nWarnings:\n";
        for (const std::string& warning : warnings)
            body << "  - " << warning << "\n";
    }
    body << "\nPlease review the result before submitting it.\n";

    mime::OutgoingMessage msg = base_message(request, from_address);
    msg.body_text = body.str();

    std::string original = "form.pdf";
    int idx = request.target_form_index();
    if (idx >= 0 && !request.attachments[static_cast<size_t>(idx)].filename.empty())
        original = request.attachments[static_cast<size_t>(idx)].filename;
    msg.attachments.push_back(mime::OutgoingAttachment{
        "completed_" + original,
        "application/pdf",
        filled.bytes,
    });

    return ComposedReply{to_outbound(msg), mime::serialize(msg)};
}

ComposedReply compose_rejection(const ingest::InboundRequest& request, const std::string& reason,
                                const std::string& from_address) {
    std::ostringstream body;
    body << "Hello,\n\n"
         << "your request could not be processed automatically.\n\n"
         << "  Reason: " << reason << "\n";
    if (!request.warnings.empty()) {
        body << "\nWarnings:\n";
        for (const std::string& warning : request.warnings)
            body << "  - " << warning << "\n";
    }
    body << "\nYou can resend the request after addressing the problem above.\n";

    mime::OutgoingMessage msg = base_message(request, from_address);
    msg.body_text = body.str();
    return ComposedReply{to_outbound(msg), mime::serialize(msg)};
}

DeliveryReceipt OutboxSink::deliver(const Bytes& bytes, const std::string& reply_msg_id) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    fs::path target = dir_ / (reply_msg_id + ".eml");
    if (fs::exists(target, ec))
        return DeliveryReceipt{target.string(), /*duplicate=*/true};
    util::atomic_write_file(target, bytes);
    return DeliveryReceipt{target.string(), /*duplicate=*/false};
}

} // namespace mailform::reply
