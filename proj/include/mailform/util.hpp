#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mailform {

// Binary payloads travel as plain std::string throughout the code base.
using Bytes = std::string;

namespace util {

// --- digests -------------------------------------------------------------

// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

// --- base64 / quoted-printable -------------------------------------------

std::string base64_encode(std::string_view data);
// Ignores whitespace; throws Error(Parse) on non-alphabet bytes.
std::string base64_decode(std::string_view data);
// Base64 with a line break every 76 characters, as MIME bodies want it.
std::string base64_encode_wrapped(std::string_view data);

std::string quoted_printable_encode(std::string_view data);
// `underscore_is_space` enables the RFC 2047 "Q" variant.
std::string quoted_printable_decode(std::string_view data, bool underscore_is_space = false);

// --- charsets -------------------------------------------------------------

// Best-effort conversion of a MIME part body to UTF-8. Understands utf-8,
// us-ascii, iso-8859-1/-15 and windows-1252. Returns false when the charset
// is unknown (caller drops the part with a warning).
bool to_utf8(std::string_view data, std::string_view charset, std::string& out);

std::string latin1_to_utf8(std::string_view data);
std::string utf16be_to_utf8(std::string_view data);
std::string utf8_to_utf16be(std::string_view data);

// Appends `cp` to `out` as UTF-8.
void append_utf8(std::string& out, uint32_t cp);
// Decodes the codepoint starting at out[i]; advances i. Invalid bytes decode
// as U+FFFD, one byte at a time.
uint32_t next_codepoint(std::string_view s, size_t& i);

// --- text normalization ----------------------------------------------------

// Trim outer ASCII whitespace and collapse inner runs to single spaces.
std::string collapse_whitespace(std::string_view s);

// Compose Latin letters followed by combining marks (acute, grave, tilde,
// diaeresis, circumflex, ring, cedilla) into their precomposed forms. Covers
// the Western European repertoire; anything else passes through untouched.
std::string compose_latin(std::string_view s);

// Field-name normalization: trim, collapse whitespace, compose. Case is kept.
std::string normalize_name(std::string_view s);

// Matching normalization: normalize_name plus ASCII + Latin-1 lowercasing.
// Used for answer scoring, option matching and checkbox truthiness.
std::string fold_for_match(std::string_view s);

// --- filesystem -------------------------------------------------------------

// Write-temp-then-rename. Throws Error(Io) on failure.
void atomic_write_file(const std::filesystem::path& path, std::string_view data);

Bytes read_file(const std::filesystem::path& path);

// --- misc --------------------------------------------------------------------

bool iequals_ascii(std::string_view a, std::string_view b);
std::string lower_ascii(std::string_view s);

// "a, b and c" style join for human-readable messages.
std::string join(const std::vector<std::string>& parts, std::string_view sep);

void log_warn(std::string_view msg);
void log_info(std::string_view msg);

} // namespace util
} // namespace mailform
