#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dispat {

namespace detail {

// CJK unified ideographs (plus extension A). Everything else falls to the
// word rule.
inline bool is_cjk(std::uint32_t cp) {
    return (cp >= 0x4e00 && cp <= 0x9fff) || (cp >= 0x3400 && cp <= 0x4dbf);
}

inline bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Decode one UTF-8 codepoint at pos; returns its byte length (malformed
// bytes are treated as single-byte non-word separators).
inline int decode_utf8(const std::string& s, std::size_t pos, std::uint32_t& cp) {
    const unsigned char c0 = static_cast<unsigned char>(s[pos]);
    if (c0 < 0x80) {
        cp = c0;
        return 1;
    }
    auto cont = [&](std::size_t i) {
        return i < s.size() && (static_cast<unsigned char>(s[i]) & 0xc0) == 0x80;
    };
    if ((c0 & 0xe0) == 0xc0 && cont(pos + 1)) {
        cp = ((c0 & 0x1fu) << 6) | (static_cast<unsigned char>(s[pos + 1]) & 0x3fu);
        return 2;
    }
    if ((c0 & 0xf0) == 0xe0 && cont(pos + 1) && cont(pos + 2)) {
        cp = ((c0 & 0x0fu) << 12) | ((static_cast<unsigned char>(s[pos + 1]) & 0x3fu) << 6) |
             (static_cast<unsigned char>(s[pos + 2]) & 0x3fu);
        return 3;
    }
    if ((c0 & 0xf8) == 0xf0 && cont(pos + 1) && cont(pos + 2) && cont(pos + 3)) {
        cp = ((c0 & 0x07u) << 18) | ((static_cast<unsigned char>(s[pos + 1]) & 0x3fu) << 12) |
             ((static_cast<unsigned char>(s[pos + 2]) & 0x3fu) << 6) |
             (static_cast<unsigned char>(s[pos + 3]) & 0x3fu);
        return 4;
    }
    cp = 0xfffd;
    return 1;
}

} // namespace detail

/// Shared tokenizer for retrieval and content embeddings. A run of CJK
/// characters emits its overlapping bigrams followed by its single
/// characters; a run of ASCII letters/digits emits one lowercased word.
/// Anything else separates runs. Order follows the text.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::vector<std::string> cjk_run; // per-character strings of the open run
    std::string word;

    auto flush_cjk = [&] {
        if (cjk_run.empty()) return;
        for (std::size_t i = 0; i + 1 < cjk_run.size(); ++i) tokens.push_back(cjk_run[i] + cjk_run[i + 1]);
        for (const std::string& c : cjk_run) tokens.push_back(c);
        cjk_run.clear();
    };
    auto flush_word = [&] {
        if (word.empty()) return;
        tokens.push_back(word);
        word.clear();
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        const unsigned char c0 = static_cast<unsigned char>(text[pos]);
        if (c0 < 0x80) {
            if (detail::is_word_byte(c0)) {
                flush_cjk();
                word += static_cast<char>(c0 >= 'A' && c0 <= 'Z' ? c0 - 'A' + 'a' : c0);
            } else {
                flush_cjk();
                flush_word();
            }
            ++pos;
            continue;
        }
        std::uint32_t cp = 0;
        const int len = detail::decode_utf8(text, pos, cp);
        if (detail::is_cjk(cp)) {
            flush_word();
            cjk_run.push_back(text.substr(pos, len));
        } else {
            flush_cjk();
            flush_word();
        }
        pos += static_cast<std::size_t>(len);
    }
    flush_cjk();
    flush_word();
    return tokens;
}

} // namespace dispat
