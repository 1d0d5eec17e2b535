#include "mailform/mime.hpp"

#include "mailform/errors.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <ctime>
#include <sstream>

namespace mailform::mime {

using util::iequals_ascii;
using util::lower_ascii;

namespace {

struct Header {
    std::string name;
    std::string value;
};

// Splits the header block from the body and unfolds continuation lines.
// Returns false when no header block is present.
bool split_headers(std::string_view raw, std::vector<Header>& headers, std::string_view& body) {
    size_t pos = 0;
    std::vector<std::string> lines;
    while (pos <= raw.size()) {
        size_t eol = raw.find('\n', pos);
        std::string_view line = (eol == std::string_view::npos)
                                    ? raw.substr(pos)
                                    : raw.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            body = (eol == std::string_view::npos) ? std::string_view{} : raw.substr(eol + 1);
            break;
        }
        if (line[0] == ' ' || line[0] == '\t') {
            if (lines.empty()) return false;
            lines.back().append(" ");
            size_t s = line.find_first_not_of(" \t");
            lines.back().append(line.substr(s == std::string_view::npos ? line.size() : s));
        } else {
            lines.emplace_back(line);
        }
        if (eol == std::string_view::npos) {
            body = {};
            break;
        }
        pos = eol + 1;
    }
    for (const std::string& line : lines) {
        size_t colon = line.find(':');
        if (colon == std::string::npos || colon == 0) return false;
        Header h;
        h.name = line.substr(0, colon);
        size_t vstart = line.find_first_not_of(" \t", colon + 1);
        h.value = (vstart == std::string::npos) ? "" : line.substr(vstart);
        // trim trailing ws
        while (!h.value.empty() && (h.value.back() == ' ' || h.value.back() == '\t'))
            h.value.pop_back();
        headers.push_back(std::move(h));
    }
    return !lines.empty();
}

const std::string* find_header(const std::vector<Header>& headers, std::string_view name) {
    for (const Header& h : headers)
        if (iequals_ascii(h.name, name)) return &h.value;
    return nullptr;
}

// "text/plain; charset=utf-8; name=\"a.txt\"" → type + param map.
void parse_content_type(std::string_view value, std::string& media_type,
                        std::map<std::string, std::string>& params) {
    size_t semi = value.find(';');
    media_type = lower_ascii(std::string(value.substr(0, semi)));
    // trim
    media_type = util::collapse_whitespace(media_type);
    if (semi == std::string_view::npos) return;
    std::string_view rest = value.substr(semi + 1);
    size_t i = 0;
    while (i < rest.size()) {
        while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t' || rest[i] == ';')) ++i;
        size_t eq = rest.find('=', i);
        if (eq == std::string_view::npos) break;
        std::string key = lower_ascii(util::collapse_whitespace(rest.substr(i, eq - i)));
        ++eq;
        std::string val;
        if (eq < rest.size() && rest[eq] == '"') {
            ++eq;
            while (eq < rest.size() && rest[eq] != '"') {
                if (rest[eq] == '\\' && eq + 1 < rest.size()) ++eq;
                val.push_back(rest[eq]);
                ++eq;
            }
            ++eq;
        } else {
            while (eq < rest.size() && rest[eq] != ';') {
                val.push_back(rest[eq]);
                ++eq;
            }
            while (!val.empty() && (val.back() == ' ' || val.back() == '\t')) val.pop_back();
        }
        if (!key.empty()) params[key] = val;
        i = eq;
    }
}

std::string strip_angle(std::string_view v) {
    std::string s = util::collapse_whitespace(v);
    if (s.size() >= 2 && s.front() == '<' && s.back() == '>')
        return s.substr(1, s.size() - 2);
    return s;
}

// Extract the addr-spec from "Display Name <user@host>" or bare address.
std::string extract_address(std::string_view v) {
    size_t lt = v.rfind('<');
    if (lt != std::string_view::npos) {
        size_t gt = v.find('>', lt);
        if (gt != std::string_view::npos)
            return std::string(v.substr(lt + 1, gt - lt - 1));
    }
    return util::collapse_whitespace(v);
}

std::string decode_transfer(std::string_view body, std::string_view encoding) {
    std::string enc = lower_ascii(encoding);
    if (enc == "base64") return util::base64_decode(body);
    if (enc == "quoted-printable") return util::quoted_printable_decode(body);
    // 7bit / 8bit / binary / empty: as-is, but normalize CRLF for text use later
    return std::string(body);
}

std::string normalize_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            if (i + 1 < s.size() && s[i + 1] == '\n') continue;
            out.push_back('\n');
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

void parse_part(std::string_view raw, Part& part, std::vector<std::string>& warnings, int depth);

// Splits a multipart body on its boundary and parses each child.
void parse_multipart(std::string_view body, const std::string& boundary, Part& part,
                     std::vector<std::string>& warnings, int depth) {
    std::string open = "--" + boundary;
    std::vector<std::string_view> sections;
    size_t pos = 0;
    std::optional<size_t> current_start;
    while (pos <= body.size()) {
        size_t eol = body.find('\n', pos);
        std::string_view line = (eol == std::string_view::npos) ? body.substr(pos)
                                                                : body.substr(pos, eol - pos);
        std::string_view trimmed = line;
        if (!trimmed.empty() && trimmed.back() == '\r') trimmed.remove_suffix(1);
        bool is_boundary = trimmed.rfind(open, 0) == 0 &&
                           (trimmed.size() == open.size() ||
                            trimmed.substr(open.size()) == "--" ||
                            trimmed.find_first_not_of(" \t", open.size()) == std::string_view::npos);
        bool is_final = is_boundary && trimmed.size() >= open.size() + 2 &&
                        trimmed.substr(open.size(), 2) == "--";
        if (is_boundary) {
            if (current_start) {
                size_t end = pos;
                // drop the CRLF that belongs to the boundary line
                if (end > *current_start && body[end - 1] == '\n') --end;
                if (end > *current_start && body[end - 1] == '\r') --end;
                sections.push_back(body.substr(*current_start, end - *current_start));
            }
            if (is_final) break;
            current_start = (eol == std::string_view::npos) ? body.size() : eol + 1;
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    for (std::string_view section : sections) {
        Part child;
        try {
            parse_part(section, child, warnings, depth + 1);
            part.children.push_back(std::move(child));
        } catch (const Error& e) {
            warnings.push_back(std::string("dropped undecodable part: ") + e.what());
        }
    }
}

void parse_part(std::string_view raw, Part& part, std::vector<std::string>& warnings, int depth) {
    if (depth > 16)
        throw Error::permanent(ErrorKind::Parse, "multipart nesting too deep");
    std::vector<Header> headers;
    std::string_view body;
    if (!split_headers(raw, headers, body)) {
        // Parts without headers default to text/plain us-ascii.
        body = raw;
    }

    const std::string* ct = find_header(headers, "Content-Type");
    if (ct)
        parse_content_type(*ct, part.media_type, part.params);
    if (part.media_type.empty())
        part.media_type = "text/plain";

    const std::string* cd = find_header(headers, "Content-Disposition");
    if (cd) {
        std::string disp_type;
        std::map<std::string, std::string> disp_params;
        parse_content_type(*cd, disp_type, disp_params);
        part.disposition = disp_type;
        auto it = disp_params.find("filename");
        if (it != disp_params.end()) part.filename = decode_header(it->second);
    }
    if (part.filename.empty()) {
        auto it = part.params.find("name");
        if (it != part.params.end()) part.filename = decode_header(it->second);
    }

    if (part.is_multipart()) {
        auto it = part.params.find("boundary");
        if (it == part.params.end() || it->second.empty())
            throw Error::permanent(ErrorKind::Parse, "multipart part without boundary");
        parse_multipart(body, it->second, part, warnings, depth);
        return;
    }

    const std::string* cte = find_header(headers, "Content-Transfer-Encoding");
    part.body = decode_transfer(body, cte ? *cte : "");

    if (part.is_text()) {
        std::string charset;
        auto it = part.params.find("charset");
        if (it != part.params.end()) charset = it->second;
        std::string text;
        if (!util::to_utf8(part.body, charset, text))
            throw Error::permanent(ErrorKind::Parse, "unsupported charset " + charset);
        part.text = normalize_newlines(text);
    }
}

} // namespace

std::string decode_header(std::string_view value) {
    std::string out;
    size_t i = 0;
    bool last_was_encoded = false;
    while (i < value.size()) {
        size_t start = value.find("=?", i);
        if (start == std::string_view::npos) {
            out.append(value.substr(i));
            break;
        }
        size_t q1 = value.find('?', start + 2);
        size_t q2 = (q1 == std::string_view::npos) ? std::string_view::npos : value.find('?', q1 + 1);
        size_t end = (q2 == std::string_view::npos) ? std::string_view::npos : value.find("?=", q2 + 1);
        if (end == std::string_view::npos) {
            out.append(value.substr(i));
            break;
        }
        std::string_view between = value.substr(i, start - i);
        // whitespace between adjacent encoded-words is dropped
        if (!last_was_encoded || between.find_first_not_of(" \t") != std::string_view::npos)
            out.append(between);
        std::string charset(value.substr(start + 2, q1 - start - 2));
        std::string enc = lower_ascii(value.substr(q1 + 1, q2 - q1 - 1));
        std::string_view payload = value.substr(q2 + 1, end - q2 - 1);
        std::string decoded_bytes;
        try {
            if (enc == "b")
                decoded_bytes = util::base64_decode(payload);
            else if (enc == "q")
                decoded_bytes = util::quoted_printable_decode(payload, /*underscore_is_space=*/true);
            else
                decoded_bytes = std::string(payload);
        } catch (const Error&) {
            decoded_bytes = std::string(payload);
        }
        std::string text;
        if (!util::to_utf8(decoded_bytes, charset, text))
            text = decoded_bytes;
        out += text;
        last_was_encoded = true;
        i = end + 2;
    }
    return out;
}

bool looks_like_message(std::string_view raw) {
    size_t pos = 0;
    while (pos < raw.size()) {
        size_t eol = raw.find('\n', pos);
        std::string_view line = (eol == std::string_view::npos) ? raw.substr(pos)
                                                                : raw.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) return false; // blank line before any header
        size_t colon = line.find(':');
        if (colon == std::string_view::npos || colon == 0) return false;
        // header names are printable ASCII without spaces
        for (char c : line.substr(0, colon))
            if (c <= 32 || c > 126) return false;
        return true;
    }
    return false;
}

std::string strip_html(std::string_view html) {
    std::string text;
    text.reserve(html.size());
    size_t i = 0;
    auto skip_until = [&](std::string_view needle) {
        size_t p = html.find(needle, i);
        size_t q = p;
        if (p == std::string_view::npos) { i = html.size(); return; }
        // find closing '>' of that end tag
        q = html.find('>', p);
        i = (q == std::string_view::npos) ? html.size() : q + 1;
    };
    while (i < html.size()) {
        char c = html[i];
        if (c == '<') {
            size_t close = html.find('>', i);
            std::string_view tag = html.substr(i + 1, (close == std::string_view::npos ? html.size() : close) - i - 1);
            std::string tag_name;
            for (char tc : tag) {
                if (tc == ' ' || tc == '\t' || tc == '\n' || tc == '\r' || tc == '/') break;
                tag_name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(tc))));
            }
            if (tag_name == "script") { i = close == std::string_view::npos ? html.size() : close + 1; skip_until("</script"); continue; }
            if (tag_name == "style") { i = close == std::string_view::npos ? html.size() : close + 1; skip_until("</style"); continue; }
            if (tag_name == "br" || tag_name == "p" || tag_name == "div" || tag_name == "tr" ||
                tag_name == "li" || tag_name == "h1" || tag_name == "h2" || tag_name == "h3" ||
                tag_name == "table")
                text.push_back(' ');
            i = (close == std::string_view::npos) ? html.size() : close + 1;
        } else if (c == '&') {
            size_t semi = html.find(';', i);
            if (semi != std::string_view::npos && semi - i <= 10) {
                std::string ent(html.substr(i + 1, semi - i - 1));
                if (ent == "amp") text.push_back('&');
                else if (ent == "lt") text.push_back('<');
                else if (ent == "gt") text.push_back('>');
                else if (ent == "quot") text.push_back('"');
                else if (ent == "apos") text.push_back('\'');
                else if (ent == "nbsp") text.push_back(' ');
                else if (!ent.empty() && ent[0] == '#') {
                    uint32_t cp = 0;
                    try {
                        cp = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                                 ? static_cast<uint32_t>(std::stoul(ent.substr(2), nullptr, 16))
                                 : static_cast<uint32_t>(std::stoul(ent.substr(1)));
                    } catch (...) { cp = 0; }
                    if (cp) util::append_utf8(text, cp);
                } else {
                    text.append(html.substr(i, semi - i + 1));
                }
                i = semi + 1;
            } else {
                text.push_back(c);
                ++i;
            }
        } else {
            text.push_back(c);
            ++i;
        }
    }
    return util::collapse_whitespace(text);
}

namespace {
void collect_leaves(const Part& p, std::vector<const Part*>& out) {
    if (p.is_multipart()) {
        for (const Part& c : p.children) collect_leaves(c, out);
    } else {
        out.push_back(&p);
    }
}
} // namespace

std::vector<const Part*> Message::leaf_parts() const {
    std::vector<const Part*> result;
    collect_leaves(root, result);
    return result;
}

Message parse(std::string_view raw) {
    std::vector<Header> headers;
    std::string_view body;
    if (!split_headers(raw, headers, body))
        throw Error::permanent(ErrorKind::Parse, "not a MIME message: no header block");

    Message msg;
    if (const std::string* v = find_header(headers, "Message-ID")) {
        msg.message_id = strip_angle(*v);
    }
    if (msg.message_id.empty()) {
        msg.message_id = "synthesized-" + util::sha256_hex(raw).substr(0, 24) + "@digest";
        msg.message_id_synthesized = true;
        msg.warnings.push_back("missing Message-ID header, synthesized from content digest");
    }
    if (const std::string* v = find_header(headers, "From")) msg.from_address = extract_address(decode_header(*v));
    if (const std::string* v = find_header(headers, "To")) msg.to_address = extract_address(decode_header(*v));
    if (const std::string* v = find_header(headers, "Subject")) msg.subject = decode_header(*v);
    if (const std::string* v = find_header(headers, "In-Reply-To")) msg.in_reply_to = strip_angle(*v);
    if (const std::string* v = find_header(headers, "Date")) msg.date_raw = *v;

    parse_part(raw, msg.root, msg.warnings, 0);
    return msg;
}

namespace {

bool needs_rfc2047(std::string_view s) {
    for (char c : s)
        if (static_cast<unsigned char>(c) > 126 || static_cast<unsigned char>(c) < 32)
            return true;
    return false;
}

std::string encode_header_value(std::string_view s) {
    if (!needs_rfc2047(s)) return std::string(s);
    return "=?utf-8?B?" + util::base64_encode(s) + "?=";
}

std::string rfc5322_date_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    static const char* days[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
    static const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                   "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s, %02d %s %04d %02d:%02d:%02d +0000",
                  days[tm.tm_wday], tm.tm_mday, months[tm.tm_mon], tm.tm_year + 1900,
                  tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

} // namespace

std::string serialize(const OutgoingMessage& msg) {
    std::string out;
    auto header = [&](std::string_view name, std::string_view value) {
        out.append(name);
        out.append(": ");
        out.append(value);
        out.append("\r\n");
    };
    header("Message-ID", "<" + msg.message_id + ">");
    if (!msg.in_reply_to.empty()) {
        header("In-Reply-To", "<" + msg.in_reply_to + ">");
        header("References", "<" + msg.in_reply_to + ">");
    }
    header("From", msg.from_address);
    header("To", msg.to_address);
    header("Subject", encode_header_value(msg.subject));
    header("Date", rfc5322_date_now());
    header("MIME-Version", "1.0");

    std::string body_part;
    body_part += "Content-Type: text/plain; charset=utf-8\r\n";
    body_part += "Content-Transfer-Encoding: quoted-printable\r\n";
    body_part += "\r\n";
    body_part += util::quoted_printable_encode(msg.body_text);

    if (msg.attachments.empty()) {
        out += body_part;
        return out;
    }

    std::string digest_seed = msg.body_text;
    for (const OutgoingAttachment& att : msg.attachments)
        digest_seed += att.bytes;
    std::string boundary = "=_mf_" + util::sha256_hex(digest_seed).substr(0, 16);
    header("Content-Type", "multipart/mixed; boundary=\"" + boundary + "\"");
    out += "\r\n";
    out += "--" + boundary + "\r\n";
    out += body_part;
    out += "\r\n";
    for (const OutgoingAttachment& att : msg.attachments) {
        out += "--" + boundary + "\r\n";
        out += "Content-Type: " + att.media_type + "; name=\"" + att.filename + "\"\r\n";
        out += "Content-Disposition: attachment; filename=\"" + att.filename + "\"\r\n";
        out += "Content-Transfer-Encoding: base64\r\n";
        out += "\r\n";
        out += util::base64_encode_wrapped(att.bytes);
    }
    out += "--" + boundary + "--\r\n";
    return out;
}

} // namespace mailform::mime
