#include "mailform/util.hpp"

#include "mailform/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

namespace mailform {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Format: return "format";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::PlanParse: return "plan-parse";
    case ErrorKind::Scoring: return "scoring";
    case ErrorKind::Config: return "config";
    case ErrorKind::Backend: return "backend";
    case ErrorKind::Ledger: return "ledger";
    }
    return "unknown";
}

namespace util {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr ||
        EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error::permanent(ErrorKind::Io, "sha256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {
const char b64_alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(unsigned char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
} // namespace

std::string base64_encode(std::string_view data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= data.size()) {
        uint32_t n = (static_cast<unsigned char>(data[i]) << 16) |
                     (static_cast<unsigned char>(data[i + 1]) << 8) |
                     static_cast<unsigned char>(data[i + 2]);
        out.push_back(b64_alphabet[(n >> 18) & 63]);
        out.push_back(b64_alphabet[(n >> 12) & 63]);
        out.push_back(b64_alphabet[(n >> 6) & 63]);
        out.push_back(b64_alphabet[n & 63]);
        i += 3;
    }
    size_t rest = data.size() - i;
    if (rest == 1) {
        uint32_t n = static_cast<unsigned char>(data[i]) << 16;
        out.push_back(b64_alphabet[(n >> 18) & 63]);
        out.push_back(b64_alphabet[(n >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        uint32_t n = (static_cast<unsigned char>(data[i]) << 16) |
                     (static_cast<unsigned char>(data[i + 1]) << 8);
        out.push_back(b64_alphabet[(n >> 18) & 63]);
        out.push_back(b64_alphabet[(n >> 12) & 63]);
        out.push_back(b64_alphabet[(n >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_decode(std::string_view data) {
    std::string out;
    out.reserve(data.size() / 4 * 3);
    uint32_t acc = 0;
    int bits = 0;
    for (char c : data) {
        if (c == '\r' || c == '\n' || c == ' ' || c == '\t') continue;
        if (c == '=') break;
        int v = b64_value(static_cast<unsigned char>(c));
        if (v < 0)
            throw Error::permanent(ErrorKind::Parse, "invalid base64 byte");
        acc = (acc << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::string base64_encode_wrapped(std::string_view data) {
    std::string raw = base64_encode(data);
    std::string out;
    out.reserve(raw.size() + raw.size() / 76 * 2 + 2);
    for (size_t i = 0; i < raw.size(); i += 76) {
        out.append(raw, i, std::min<size_t>(76, raw.size() - i));
        out += "\r\n";
    }
    return out;
}

std::string quoted_printable_encode(std::string_view data) {
    static const char hex[] = "0123456789ABCDEF";
    std::string out;
    int col = 0;
    auto soft_break = [&] {
        out += "=\r\n";
        col = 0;
    };
    for (size_t i = 0; i < data.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(data[i]);
        if (c == '\n') {
            out += "\r\n";
            col = 0;
            continue;
        }
        if (c == '\r') continue; // normalized to CRLF via '\n'
        bool literal = (c >= 33 && c <= 126 && c != '=') || c == ' ' || c == '\t';
        // keep room for "=XX" plus a possible soft break
        if (col >= 72) soft_break();
        if (literal) {
            out.push_back(static_cast<char>(c));
            col += 1;
        } else {
            out.push_back('=');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xf]);
            col += 3;
        }
    }
    return out;
}

std::string quoted_printable_decode(std::string_view data, bool underscore_is_space) {
    auto hexval = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        char c = data[i];
        if (c == '=') {
            if (i + 1 < data.size() && (data[i + 1] == '\r' || data[i + 1] == '\n')) {
                // soft line break
                i += (i + 2 < data.size() && data[i + 1] == '\r' && data[i + 2] == '\n') ? 2 : 1;
                continue;
            }
            if (i + 2 < data.size()) {
                int hi = hexval(data[i + 1]);
                int lo = hexval(data[i + 2]);
                if (hi >= 0 && lo >= 0) {
                    out.push_back(static_cast<char>((hi << 4) | lo));
                    i += 2;
                    continue;
                }
            }
            out.push_back('=');
        } else if (c == '_' && underscore_is_space) {
            out.push_back(' ');
        } else if (c == '\r') {
            // CRLF → LF
        } else {
            out.push_back(c);
        }
    }
    return out;
}

void append_utf8(std::string& out, uint32_t cp) {
    if (cp <= 0x7f) {
        out.push_back(static_cast<char>(cp));
    } else if (cp <= 0x7ff) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp <= 0xffff) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

uint32_t next_codepoint(std::string_view s, size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    auto cont = [&](size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xc0) == 0x80;
    };
    if (c < 0x80) {
        ++i;
        return c;
    }
    if ((c & 0xe0) == 0xc0 && cont(1)) {
        uint32_t cp = (c & 0x1f) << 6 | (static_cast<unsigned char>(s[i + 1]) & 0x3f);
        i += 2;
        return cp;
    }
    if ((c & 0xf0) == 0xe0 && cont(1) && cont(2)) {
        uint32_t cp = (c & 0x0f) << 12 | (static_cast<unsigned char>(s[i + 1]) & 0x3f) << 6 |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3f);
        i += 3;
        return cp;
    }
    if ((c & 0xf8) == 0xf0 && cont(1) && cont(2) && cont(3)) {
        uint32_t cp = (c & 0x07) << 18 | (static_cast<unsigned char>(s[i + 1]) & 0x3f) << 12 |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3f) << 6 |
                      (static_cast<unsigned char>(s[i + 3]) & 0x3f);
        i += 4;
        return cp;
    }
    ++i;
    return 0xfffd;
}

std::string latin1_to_utf8(std::string_view data) {
    std::string out;
    out.reserve(data.size());
    for (char ch : data)
        append_utf8(out, static_cast<unsigned char>(ch));
    return out;
}

namespace {
// windows-1252 0x80..0x9F, 0 where undefined (falls back to U+FFFD).
const uint16_t cp1252_high[32] = {
    0x20ac, 0,      0x201a, 0x0192, 0x201e, 0x2026, 0x2020, 0x2021,
    0x02c6, 0x2030, 0x0160, 0x2039, 0x0152, 0,      0x017d, 0,
    0,      0x2018, 0x2019, 0x201c, 0x201d, 0x2022, 0x2013, 0x2014,
    0x02dc, 0x2122, 0x0161, 0x203a, 0x0153, 0,      0x017e, 0x0178,
};
} // namespace

bool to_utf8(std::string_view data, std::string_view charset, std::string& out) {
    std::string cs = lower_ascii(charset);
    if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii") {
        out.assign(data);
        return true;
    }
    if (cs == "iso-8859-1" || cs == "latin1" || cs == "iso-8859-15") {
        out = latin1_to_utf8(data);
        return true;
    }
    if (cs == "windows-1252" || cs == "cp1252") {
        out.clear();
        for (char ch : data) {
            unsigned char c = static_cast<unsigned char>(ch);
            if (c >= 0x80 && c <= 0x9f) {
                uint16_t cp = cp1252_high[c - 0x80];
                append_utf8(out, cp ? cp : 0xfffd);
            } else {
                append_utf8(out, c);
            }
        }
        return true;
    }
    return false;
}

std::string utf16be_to_utf8(std::string_view data) {
    std::string out;
    size_t i = 0;
    if (data.size() >= 2 && static_cast<unsigned char>(data[0]) == 0xfe &&
        static_cast<unsigned char>(data[1]) == 0xff)
        i = 2;
    while (i + 1 < data.size()) {
        uint32_t u = (static_cast<unsigned char>(data[i]) << 8) | static_cast<unsigned char>(data[i + 1]);
        i += 2;
        if (u >= 0xd800 && u <= 0xdbff && i + 1 < data.size()) {
            uint32_t lo = (static_cast<unsigned char>(data[i]) << 8) | static_cast<unsigned char>(data[i + 1]);
            if (lo >= 0xdc00 && lo <= 0xdfff) {
                u = 0x10000 + ((u - 0xd800) << 10) + (lo - 0xdc00);
                i += 2;
            }
        }
        append_utf8(out, u);
    }
    return out;
}

std::string utf8_to_utf16be(std::string_view data) {
    std::string out;
    out.push_back(static_cast<char>(0xfe));
    out.push_back(static_cast<char>(0xff));
    size_t i = 0;
    while (i < data.size()) {
        uint32_t cp = next_codepoint(data, i);
        if (cp > 0xffff) {
            uint32_t v = cp - 0x10000;
            uint16_t hi = static_cast<uint16_t>(0xd800 + (v >> 10));
            uint16_t lo = static_cast<uint16_t>(0xdc00 + (v & 0x3ff));
            out.push_back(static_cast<char>(hi >> 8));
            out.push_back(static_cast<char>(hi & 0xff));
            out.push_back(static_cast<char>(lo >> 8));
            out.push_back(static_cast<char>(lo & 0xff));
        } else {
            out.push_back(static_cast<char>(cp >> 8));
            out.push_back(static_cast<char>(cp & 0xff));
        }
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

namespace {
// (base letter, combining mark) → precomposed codepoint. The Western
// European set: acute 0301, grave 0300, circumflex 0302, tilde 0303,
// diaeresis 0308, ring 030A, cedilla 0327.
const std::map<std::pair<uint32_t, uint32_t>, uint32_t>& compose_table() {
    static const std::map<std::pair<uint32_t, uint32_t>, uint32_t> table = {
        {{'A', 0x300}, 0xc0}, {{'A', 0x301}, 0xc1}, {{'A', 0x302}, 0xc2}, {{'A', 0x303}, 0xc3},
        {{'A', 0x308}, 0xc4}, {{'A', 0x30a}, 0xc5}, {{'C', 0x327}, 0xc7}, {{'E', 0x300}, 0xc8},
        {{'E', 0x301}, 0xc9}, {{'E', 0x302}, 0xca}, {{'E', 0x308}, 0xcb}, {{'I', 0x300}, 0xcc},
        {{'I', 0x301}, 0xcd}, {{'I', 0x302}, 0xce}, {{'I', 0x308}, 0xcf}, {{'N', 0x303}, 0xd1},
        {{'O', 0x300}, 0xd2}, {{'O', 0x301}, 0xd3}, {{'O', 0x302}, 0xd4}, {{'O', 0x303}, 0xd5},
        {{'O', 0x308}, 0xd6}, {{'U', 0x300}, 0xd9}, {{'U', 0x301}, 0xda}, {{'U', 0x302}, 0xdb},
        {{'U', 0x308}, 0xdc}, {{'Y', 0x301}, 0xdd},
        {{'a', 0x300}, 0xe0}, {{'a', 0x301}, 0xe1}, {{'a', 0x302}, 0xe2}, {{'a', 0x303}, 0xe3},
        {{'a', 0x308}, 0xe4}, {{'a', 0x30a}, 0xe5}, {{'c', 0x327}, 0xe7}, {{'e', 0x300}, 0xe8},
        {{'e', 0x301}, 0xe9}, {{'e', 0x302}, 0xea}, {{'e', 0x308}, 0xeb}, {{'i', 0x300}, 0xec},
        {{'i', 0x301}, 0xed}, {{'i', 0x302}, 0xee}, {{'i', 0x308}, 0xef}, {{'n', 0x303}, 0xf1},
        {{'o', 0x300}, 0xf2}, {{'o', 0x301}, 0xf3}, {{'o', 0x302}, 0xf4}, {{'o', 0x303}, 0xf5},
        {{'o', 0x308}, 0xf6}, {{'u', 0x300}, 0xf9}, {{'u', 0x301}, 0xfa}, {{'u', 0x302}, 0xfb},
        {{'u', 0x308}, 0xfc}, {{'y', 0x301}, 0xfd}, {{'y', 0x308}, 0xff},
    };
    return table;
}
} // namespace

std::string compose_latin(std::string_view s) {
    std::vector<uint32_t> cps;
    cps.reserve(s.size());
    size_t i = 0;
    while (i < s.size())
        cps.push_back(next_codepoint(s, i));
    std::string out;
    out.reserve(s.size());
    const auto& table = compose_table();
    for (size_t k = 0; k < cps.size(); ++k) {
        if (k + 1 < cps.size()) {
            auto it = table.find({cps[k], cps[k + 1]});
            if (it != table.end()) {
                append_utf8(out, it->second);
                ++k;
                continue;
            }
        }
        append_utf8(out, cps[k]);
    }
    return out;
}

std::string normalize_name(std::string_view s) {
    return compose_latin(collapse_whitespace(s));
}

std::string fold_for_match(std::string_view s) {
    std::string composed = normalize_name(s);
    std::string out;
    out.reserve(composed.size());
    size_t i = 0;
    while (i < composed.size()) {
        uint32_t cp = next_codepoint(composed, i);
        if (cp >= 'A' && cp <= 'Z')
            cp += 32;
        else if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) // Latin-1 uppercase block
            cp += 32;
        append_utf8(out, cp);
    }
    return out;
}

void atomic_write_file(const std::filesystem::path& path, std::string_view data) {
    namespace fs = std::filesystem;
    static std::mt19937_64 rng{std::random_device{}()};
    static std::mutex rng_mutex;
    uint64_t nonce;
    {
        std::lock_guard<std::mutex> lock(rng_mutex);
        nonce = rng();
    }
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(nonce % 1000000);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error::retryable(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error::retryable(ErrorKind::Io, "short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error::retryable(ErrorKind::Io, "rename to " + path.string() + " failed");
    }
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error::retryable(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad())
        throw Error::retryable(ErrorKind::Io, "read failed for " + path.string());
    return buf.str();
}

bool iequals_ascii(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x += 32;
        if (y >= 'A' && y <= 'Z') y += 32;
        if (x != y) return false;
    }
    return true;
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c += 32;
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void log_warn(std::string_view msg) {
    std::cerr << "[warn] " << msg << "\n";
}

void log_info(std::string_view msg) {
    std::cerr << "[info] " << msg << "\n";
}

} // namespace util
} // namespace mailform
