/// @file text.cpp

#include "rec/text.hpp"

#include <algorithm>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "rec/errors.hpp"

namespace rec::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

const icu::Normalizer2& nfc_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || n == nullptr) throw RecError(ErrorCode::InvalidArgument, "ICU NFC unavailable");
    return *n;
}

icu::UnicodeString to_icu(std::u32string_view chars) {
    return icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(chars.data()),
                                         static_cast<int32_t>(chars.size()));
}

std::u32string from_icu(const icu::UnicodeString& s) {
    std::u32string out;
    out.reserve(static_cast<std::size_t>(s.length()));
    for (int32_t i = 0; i < s.length();) {
        UChar32 c = s.char32At(i);
        out.push_back(static_cast<char32_t>(c));
        i += U16_LENGTH(c);
    }
    return out;
}

}  // namespace

std::u32string decode_utf8(std::string_view bytes) {
    std::u32string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(bytes[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(len) > n) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
        if (!ok || overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

std::string encode_utf8(std::u32string_view chars) {
    std::string out;
    out.reserve(chars.size());
    for (char32_t c : chars) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::size_t codepoint_count(std::string_view bytes) { return decode_utf8(bytes).size(); }

std::string slice(std::u32string_view chars, CharSpan span) {
    const std::size_t start = std::min(span.start, chars.size());
    const std::size_t end = std::clamp(span.end, start, chars.size());
    return encode_utf8(chars.substr(start, end - start));
}

std::string slice(std::string_view bytes, CharSpan span) { return slice(decode_utf8(bytes), span); }

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

std::u32string nfc(std::u32string_view chars) {
    const auto& norm = nfc_instance();
    UErrorCode status = U_ZERO_ERROR;
    const icu::UnicodeString src = to_icu(chars);
    if (norm.isNormalized(src, status) && U_SUCCESS(status)) return std::u32string(chars);
    status = U_ZERO_ERROR;
    const icu::UnicodeString dst = norm.normalize(src, status);
    if (U_FAILURE(status)) return std::u32string(chars);
    return from_icu(dst);
}

std::u32string normalize(std::u32string_view chars) { return NormalizedText(chars).text(); }

std::string normalize(std::string_view bytes) { return encode_utf8(normalize(decode_utf8(bytes))); }

NormalizedText::NormalizedText(std::u32string_view original) {
    // Pass 1: NFC with provenance. Text is cut at normalization boundaries so
    // every output code point can be traced to the input segment it came from.
    std::u32string composed;
    std::vector<CharSpan> composed_origin;
    composed.reserve(original.size());
    composed_origin.reserve(original.size());

    const auto& norm = nfc_instance();
    UErrorCode status = U_ZERO_ERROR;
    const bool already_nfc = norm.isNormalized(to_icu(original), status) && U_SUCCESS(status);
    if (already_nfc) {
        composed.assign(original);
        for (std::size_t i = 0; i < original.size(); ++i) composed_origin.push_back({i, i + 1});
    } else {
        std::size_t seg_start = 0;
        auto flush = [&](std::size_t seg_end) {
            if (seg_end <= seg_start) return;
            const std::u32string piece = nfc(original.substr(seg_start, seg_end - seg_start));
            for (char32_t c : piece) {
                composed.push_back(c);
                composed_origin.push_back({seg_start, seg_end});
            }
            seg_start = seg_end;
        };
        for (std::size_t i = 1; i < original.size(); ++i) {
            if (norm.hasBoundaryBefore(static_cast<UChar32>(original[i]))) flush(i);
        }
        flush(original.size());
    }

    // Pass 2: collapse whitespace runs, trim both ends.
    normalized_.reserve(composed.size());
    origin_.reserve(composed.size());
    std::size_t i = 0;
    const std::size_t n = composed.size();
    while (i < n && is_space(composed[i])) ++i;
    while (i < n) {
        if (is_space(composed[i])) {
            const std::size_t run_start = i;
            while (i < n && is_space(composed[i])) ++i;
            if (i == n) break;
            normalized_.push_back(U' ');
            origin_.push_back({composed_origin[run_start].start, composed_origin[i - 1].end});
        } else {
            normalized_.push_back(composed[i]);
            origin_.push_back(composed_origin[i]);
            ++i;
        }
    }
}

CharSpan NormalizedText::original_span(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > origin_.size())
        throw RecError(ErrorCode::InvalidArgument, "normalized span out of range");
    return {origin_[begin].start, origin_[end - 1].end};
}

}  // namespace rec::text
