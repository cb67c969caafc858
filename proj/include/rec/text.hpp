/// @file text.hpp
/// @brief UTF-8 decoding and the normalization used for verbatim matching.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rec/model.hpp"

namespace rec::text {

/// Invalid byte sequences decode to U+FFFD, one per offending byte.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view chars);

std::size_t codepoint_count(std::string_view bytes);
/// Substring by code-point span; the span is clamped to the text.
std::string slice(std::string_view bytes, CharSpan span);
std::string slice(std::u32string_view chars, CharSpan span);

bool is_space(char32_t c);

std::u32string nfc(std::u32string_view chars);

/// NFC, every whitespace run collapsed to one U+0020, ends trimmed.
std::u32string normalize(std::u32string_view chars);
std::string normalize(std::string_view bytes);

/// Normalized view of a source text that remembers, for each normalized
/// code point, which span of the original it came from.
class NormalizedText {
public:
    explicit NormalizedText(std::u32string_view original);

    const std::u32string& text() const { return normalized_; }

    /// Original span covering normalized positions [begin, end); end > begin.
    CharSpan original_span(std::size_t begin, std::size_t end) const;

private:
    std::u32string normalized_;
    std::vector<CharSpan> origin_;
};

}  // namespace rec::text
