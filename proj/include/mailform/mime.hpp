#pragma once

#include "mailform/util.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mailform::mime {

// One decoded body part. For multipart containers `children` is populated
// and the body fields stay empty.
struct Part {
    std::string media_type;                       // lowercased "type/subtype"
    std::map<std::string, std::string> params;    // content-type parameters
    std::string disposition;                      // "", "inline", "attachment"
    std::string filename;                         // from disposition or name param
    Bytes body;                                   // transfer-decoded bytes
    std::string text;                             // body converted to UTF-8 (text/* only)
    std::vector<Part> children;

    bool is_multipart() const { return media_type.rfind("multipart/", 0) == 0; }
    bool is_text() const { return media_type.rfind("text/", 0) == 0; }
    // A part that carries a file: explicit attachment disposition or a
    // filename on a non-text part.
    bool is_attachment() const {
        return disposition == "attachment" || (!filename.empty() && !is_text());
    }
};

struct Message {
    std::string message_id;          // without angle brackets
    bool message_id_synthesized = false;
    std::string from_address;        // addr-spec only
    std::string to_address;
    std::string subject;             // RFC 2047 decoded
    std::string in_reply_to;         // without angle brackets
    std::string date_raw;
    Part root;
    std::vector<std::string> warnings; // dropped parts etc.

    // Depth-first list of leaf (non-multipart) parts in original order.
    std::vector<const Part*> leaf_parts() const;
};

// Parses an RFC 5322 / MIME message. Throws Error(Parse) when the bytes are
// not a MIME message at all; individual undecodable parts are dropped with a
// warning instead.
Message parse(std::string_view raw);

// Decodes RFC 2047 encoded-words in a header value.
std::string decode_header(std::string_view value);

// Quick structural sniff used by the inbox poller: does this look like a
// message (a "Name: value" header line before any blank line)?
bool looks_like_message(std::string_view raw);

// Strip HTML down to its visible text: tags removed, common entities
// decoded, whitespace collapsed.
std::string strip_html(std::string_view html);

// --- outgoing ---------------------------------------------------------------

struct OutgoingAttachment {
    std::string filename;
    std::string media_type;
    Bytes bytes;
};

struct OutgoingMessage {
    std::string from_address;
    std::string to_address;
    std::string subject;
    std::string message_id;    // without angle brackets
    std::string in_reply_to;   // without angle brackets; also sets References
    std::string body_text;     // UTF-8
    std::vector<OutgoingAttachment> attachments;
};

// Serializes to CRLF-delimited MIME bytes. The body goes out quoted-printable,
// the attachment base64. The multipart boundary is derived from the content
// digest so identical messages serialize identically apart from the Date
// header.
std::string serialize(const OutgoingMessage& msg);

} // namespace mailform::mime
