#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace decnn::utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD, one per
/// byte, so offsets stay well defined on dirty input.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view code_points);

void append(std::string& out, char32_t cp);

/// Substring by code-point range [start, end).
std::string slice(std::string_view text, std::size_t start, std::size_t end);

std::size_t length(std::string_view text);

/// ASCII-only lowercase; leaves multibyte sequences untouched.
std::string ascii_lower(std::string_view text);

}  // namespace decnn::utf8
