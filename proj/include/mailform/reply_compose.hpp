#pragma once

#include "mailform/form_model.hpp"
#include "mailform/mail_ingest.hpp"
#include "mailform/plan_engine.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace mailform::reply {

struct OutboundReply {
    std::string message_id;   // deterministic per request
    std::string in_reply_to;  // request message_id
    std::string to;
    std::string subject;      // "Re: " + original
    std::string body_text;
    std::string attachment_filename; // empty for rejections
    Bytes attachment_bytes;
};

struct ComposedReply {
    OutboundReply reply;
    Bytes bytes; // serialized MIME
};

// Reply message id derived from the request id, so resending the same
// request always produces the same outbox filename.
std::string reply_message_id(const std::string& request_message_id);

// Success reply: summary of applied/blank/skipped counts, every skipped
// field with its reason, warnings, and the completed form attached as
// `completed_<original>.pdf`.
ComposedReply compose_reply(const ingest::InboundRequest& request, const form::FilledForm& filled,
                            const plan::CompletionPlan& plan, const std::string& from_address);

// Failure reply without attachment explaining a user-addressable reason.
ComposedReply compose_rejection(const ingest::InboundRequest& request, const std::string& reason,
                                const std::string& from_address);

struct DeliveryReceipt {
    std::string location;  // outbox path or transport id
    bool duplicate = false;
};

// Accepts serialized reply bytes for delivery.
class DeliverySink {
public:
    virtual ~DeliverySink() = default;
    virtual DeliveryReceipt deliver(const Bytes& bytes, const std::string& reply_msg_id) = 0;
};

// Hermetic sink: writes `<message_id>.eml` atomically into a directory.
// A second delivery of the same message id is detected by filename and
// reported as a duplicate without rewriting the file.
class OutboxSink : public DeliverySink {
public:
    explicit OutboxSink(std::filesystem::path dir) : dir_(std::move(dir)) {}
    DeliveryReceipt deliver(const Bytes& bytes, const std::string& reply_msg_id) override;

private:
    std::filesystem::path dir_;
};

} // namespace mailform::reply
