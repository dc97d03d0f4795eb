#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace athena {

// Decodes UTF-8 into code points. Invalid bytes are passed through as
// single code points so malformed input never throws.
std::vector<char32_t> utf8_decode(std::string_view text);

std::string utf8_encode(const std::vector<char32_t>& points);

// Suffix of `text` holding at most `max_points` code points.
std::string_view utf8_tail(std::string_view text, std::size_t max_points);

std::size_t utf8_length(std::string_view text);

std::string trim(std::string_view text);

// Canonical label form shared by the dataset loader, the knowledge base
// and judgment parsing: trims whitespace and strips wrapping bracket
// decoration plus leading/trailing punctuation (ASCII and CJK).
std::string normalize_label(std::string_view raw);

std::uint64_t fnv1a64(std::string_view data);

std::string to_hex(std::uint64_t value);

// Replaces every "{NAME}" placeholder with its value; unknown
// placeholders are left untouched.
std::string substitute_placeholders(
    std::string_view text,
    const std::vector<std::pair<std::string, std::string>>& values);

std::string read_text_file(const std::string& path);

void write_text_file(const std::string& path, std::string_view content);

}  // namespace athena
