#pragma once
// String utilities: entity normalization, tokenization, stable hashing.
//
// Entity keys are corpus-global: case-folded, whitespace-collapsed,
// surrounding punctuation stripped. Normalization is deliberately
// conservative ("saint peter" and "st. peter" stay distinct; synonymy
// edges handle fuzzy matching).

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace proprag {

constexpr uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

// FNV-1a over bytes, seedable so a second independent hash is cheap.
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = kFnvOffset) {
    uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= static_cast<uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

inline std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Whitespace-delimited tokens, no other processing.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        size_t b = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > b) out.emplace_back(s.substr(b, i - b));
    }
    return out;
}

inline std::string lowercase_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (char c : s) {
        if (is_space(c)) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

inline bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Canonical corpus-global entity key. Internal punctuation survives
// ("st. peter"); only the surrounding shell is stripped.
inline std::string normalize_entity(std::string_view surface) {
    std::string s = collapse_whitespace(lowercase_ascii(surface));
    size_t b = 0, e = s.size();
    while (b < e && is_ascii_punct(s[b])) ++b;
    while (e > b && is_ascii_punct(s[e - 1])) --e;
    return trim(std::string_view(s).substr(b, e - b));
}

} // namespace proprag
