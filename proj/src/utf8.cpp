#include "mhqa/utf8.hpp"

#include <algorithm>

namespace mhqa::utf8 {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

}  // namespace

std::vector<CodePoint> decode(std::string_view text) {
    std::vector<CodePoint> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        auto b0 = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= text.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            auto b = static_cast<unsigned char>(text[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            out.push_back({kReplacement, i, 1});
            ++i;
            continue;
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

void append(std::string& out, char32_t cp) {
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

std::size_t length(std::string_view text) { return decode(text).size(); }

std::vector<std::size_t> boundaries(std::string_view text) {
    auto cps = decode(text);
    std::vector<std::size_t> out;
    out.reserve(cps.size() + 1);
    for (const auto& c : cps) {
        out.push_back(c.byte_offset);
    }
    out.push_back(text.size());
    return out;
}

std::string slice(std::string_view text, std::size_t begin, std::size_t end) {
    auto b = boundaries(text);
    const std::size_t n = b.size() - 1;
    begin = std::min(begin, n);
    end = std::clamp(end, begin, n);
    return std::string(text.substr(b[begin], b[end] - b[begin]));
}

// Letters and digits across the scripts the corpus plausibly contains. Symbol
// and punctuation blocks are excluded; unlisted code points above U+3000 are
// treated as ideographic letters.
bool is_alnum(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (in(cp, 0x00C0, 0x024F)) {
        return cp != 0x00D7 && cp != 0x00F7;
    }
    if (cp == 0x00AA || cp == 0x00B5 || cp == 0x00BA) {
        return true;
    }
    if (in(cp, 0x0370, 0x03FF)) {
        return cp != 0x037E && cp != 0x0387 && cp != 0x0375;
    }
    if (in(cp, 0x0400, 0x052F)) {
        return !in(cp, 0x0482, 0x0489);
    }
    if (in(cp, 0x0590, 0x05FF)) {
        return in(cp, 0x05D0, 0x05EA);
    }
    if (in(cp, 0x0600, 0x06FF)) {
        return in(cp, 0x0620, 0x064A) || in(cp, 0x0660, 0x0669) || in(cp, 0x0671, 0x06D3);
    }
    if (in(cp, 0x0900, 0x0DFF)) {
        return true;
    }
    if (in(cp, 0x1E00, 0x1FFF)) {
        return true;
    }
    if (in(cp, 0x2000, 0x2BFF) || in(cp, 0x3000, 0x303F) || in(cp, 0xFE30, 0xFE4F)) {
        return false;
    }
    if (in(cp, 0xFF10, 0xFF19) || in(cp, 0xFF21, 0xFF3A) || in(cp, 0xFF41, 0xFF5A)) {
        return true;
    }
    if (in(cp, 0xFF00, 0xFFEF) || cp == kReplacement || in(cp, 0xE000, 0xF8FF)) {
        return false;
    }
    if (in(cp, 0x1F000, 0x1FAFF)) {
        return false;
    }
    return cp >= 0x3040;
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') {
        return cp + 32;
    }
    if (cp < 0x80) {
        return cp;
    }
    if (in(cp, 0x00C0, 0x00DE) && cp != 0x00D7) {
        return cp + 32;
    }
    if (in(cp, 0x0100, 0x0137) || in(cp, 0x014A, 0x0177)) {
        return cp | 1U;
    }
    if (in(cp, 0x0139, 0x0148) || in(cp, 0x0179, 0x017E)) {
        return (cp % 2 == 1) ? cp + 1 : cp;
    }
    if (in(cp, 0x0391, 0x03AB) && cp != 0x03A2) {
        return cp + 32;
    }
    if (in(cp, 0x0410, 0x042F)) {
        return cp + 32;
    }
    if (in(cp, 0x0400, 0x040F)) {
        return cp + 80;
    }
    return cp;
}

}  // namespace mhqa::utf8
