#include "athena/text.hpp"

#include "athena/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace athena {

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Whitespace: ASCII plus ideographic space U+3000 and NBSP.
bool is_space_cp(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\r' || cp == U'\n' ||
           cp == U'\f' || cp == U'\v' || cp == 0x3000 || cp == 0x00A0;
}

bool is_bracket_or_punct_cp(char32_t cp) {
    static const std::u32string kStrip =
        U"[](){}<>\"'`.,;:!?~*#-_/\\|"
        U"。，、；：！？．【】〔〕《》〈〉「」『』（）“”‘’·…—"
        U"　";
    return kStrip.find(cp) != std::u32string::npos;
}

}  // namespace

std::vector<char32_t> utf8_decode(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c0 = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        char32_t cp = c0;
        if (c0 < 0x80) {
            len = 1;
        } else if ((c0 & 0xE0) == 0xC0) {
            len = 2;
            cp = c0 & 0x1F;
        } else if ((c0 & 0xF0) == 0xE0) {
            len = 3;
            cp = c0 & 0x0F;
        } else if ((c0 & 0xF8) == 0xF0) {
            len = 4;
            cp = c0 & 0x07;
        } else {
            out.push_back(c0);  // stray continuation byte
            ++i;
            continue;
        }
        if (len > 1) {
            if (i + len > text.size()) {
                out.push_back(c0);
                ++i;
                continue;
            }
            bool valid = true;
            char32_t acc = cp;
            for (std::size_t j = 1; j < len; ++j) {
                unsigned char cj = static_cast<unsigned char>(text[i + j]);
                if (!is_continuation(cj)) {
                    valid = false;
                    break;
                }
                acc = (acc << 6) | (cj & 0x3F);
            }
            if (!valid) {
                out.push_back(c0);
                ++i;
                continue;
            }
            cp = acc;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(const std::vector<char32_t>& points) {
    std::string out;
    out.reserve(points.size() * 3);
    for (char32_t cp : points) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::string_view utf8_tail(std::string_view text, std::size_t max_points) {
    if (max_points == 0) return text.substr(text.size());
    std::size_t count = 0;
    std::size_t i = text.size();
    while (i > 0 && count < max_points) {
        --i;
        while (i > 0 && is_continuation(static_cast<unsigned char>(text[i]))) --i;
        ++count;
    }
    return text.substr(i);
}

std::size_t utf8_length(std::string_view text) {
    std::size_t n = 0;
    for (char c : text) {
        if (!is_continuation(static_cast<unsigned char>(c))) ++n;
    }
    return n;
}

std::string trim(std::string_view text) {
    auto points = utf8_decode(text);
    std::size_t begin = 0;
    std::size_t end = points.size();
    while (begin < end && is_space_cp(points[begin])) ++begin;
    while (end > begin && is_space_cp(points[end - 1])) --end;
    return utf8_encode({points.begin() + begin, points.begin() + end});
}

std::string normalize_label(std::string_view raw) {
    auto points = utf8_decode(raw);
    std::size_t begin = 0;
    std::size_t end = points.size();
    auto strippable = [](char32_t cp) {
        return is_space_cp(cp) || is_bracket_or_punct_cp(cp);
    };
    while (begin < end && strippable(points[begin])) ++begin;
    while (end > begin && strippable(points[end - 1])) --end;
    return utf8_encode({points.begin() + begin, points.begin() + end});
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string substitute_placeholders(
    std::string_view text,
    const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out(text);
    for (const auto& [name, value] : values) {
        const std::string token = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write file: " + path);
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error(ErrorKind::Io, "short write: " + path);
    }
}

}  // namespace athena
