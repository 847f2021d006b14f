#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mhqa::utf8 {

struct CodePoint {
    char32_t value;
    std::size_t byte_offset;
    std::size_t byte_length;
};

/// Decodes UTF-8 into code points. Invalid sequences decode to U+FFFD one
/// byte at a time so offsets stay monotone.
std::vector<CodePoint> decode(std::string_view text);

void append(std::string& out, char32_t cp);

/// Number of code points in `text`.
std::size_t length(std::string_view text);

/// Byte offset of every code point boundary: result.size() == length + 1.
std::vector<std::size_t> boundaries(std::string_view text);

/// Substring by code point indices [begin, end).
std::string slice(std::string_view text, std::size_t begin, std::size_t end);

bool is_alnum(char32_t cp);
char32_t to_lower(char32_t cp);

}  // namespace mhqa::utf8
