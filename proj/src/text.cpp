#include "repoctx/text.hpp"
#include "repoctx/errors.hpp"

#include <algorithm>
#include <cctype>

namespace repoctx {

const char* err_code_name(ErrCode code) {
    switch (code) {
        case ErrCode::UsageError: return "usage_error";
        case ErrCode::IoError: return "io_error";
        case ErrCode::NoValidInstances: return "no_valid_instances";
        case ErrCode::LikelihoodUnavailable: return "likelihood_unavailable";
        case ErrCode::SignalUnavailable: return "signal_unavailable";
        case ErrCode::CompletionUnavailable: return "completion_unavailable";
        case ErrCode::DegenerateTarget: return "degenerate_target";
        case ErrCode::PromptOverflow: return "prompt_overflow";
        case ErrCode::FormatInapplicable: return "format_inapplicable";
        case ErrCode::MismatchedReports: return "mismatched_reports";
    }
    return "unknown";
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (true) {
        size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    size_t total = 0;
    for (const auto& l : lines) total += l.size() + 1;
    out.reserve(total);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

namespace {

constexpr const char* kReplacement = "\xEF\xBF\xBD"; // U+FFFD

// Returns the length of a valid UTF-8 sequence starting at p, or 0.
int utf8_seq_len(const unsigned char* p, size_t avail) {
    unsigned char c = p[0];
    if (c < 0x80) return 1;
    int len;
    uint32_t min_cp;
    if ((c & 0xE0) == 0xC0) { len = 2; min_cp = 0x80; }
    else if ((c & 0xF0) == 0xE0) { len = 3; min_cp = 0x800; }
    else if ((c & 0xF8) == 0xF0) { len = 4; min_cp = 0x10000; }
    else return 0;
    if (avail < static_cast<size_t>(len)) return 0;
    uint32_t cp = c & (0xFF >> (len + 1));
    for (int i = 1; i < len; ++i) {
        if ((p[i] & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (p[i] & 0x3F);
    }
    if (cp < min_cp || cp > 0x10FFFF) return 0;
    if (cp >= 0xD800 && cp <= 0xDFFF) return 0; // surrogates
    return len;
}

} // namespace

std::string utf8_sanitize(std::string_view bytes, bool* had_invalid) {
    std::string out;
    out.reserve(bytes.size());
    bool invalid = false;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    size_t i = 0;
    while (i < bytes.size()) {
        int len = utf8_seq_len(p + i, bytes.size() - i);
        if (len == 0) {
            out += kReplacement;
            invalid = true;
            ++i;
        } else {
            out.append(bytes.substr(i, static_cast<size_t>(len)));
            i += static_cast<size_t>(len);
        }
    }
    if (had_invalid) *had_invalid = invalid;
    return out;
}

namespace {
inline bool is_word(unsigned char c) {
    return std::isalnum(c) || c == '_';
}
} // namespace

std::vector<std::string> tokenize_all(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < text.size()) {
        if (is_word(static_cast<unsigned char>(text[i]))) {
            size_t j = i + 1;
            while (j < text.size() && is_word(static_cast<unsigned char>(text[j]))) ++j;
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            ++i;
        }
    }
    return tokens;
}

std::vector<std::string> tokenize_set(std::string_view text) {
    auto tokens = tokenize_all(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

int fallback_token_count(std::string_view text) {
    int count = 0;
    size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_word(c)) {
            ++count;
            while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++count; // each punctuation character on its own
            ++i;
        }
    }
    return count;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    // expects sorted/deduped inputs (tokenize_set output)
    if (a.empty() && b.empty()) return 0.0;
    size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
        int cmp = a[i].compare(b[j]);
        if (cmp == 0) { ++common; ++i; ++j; }
        else if (cmp < 0) ++i;
        else ++j;
    }
    size_t uni = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

std::string strip(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t Rng::next_u64() {
    // splitmix64 step feeding an xorshift mix keeps the sequence stable
    // across platforms without std::mt19937_64's engine-template baggage.
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t Rng::bounded(uint64_t n) {
    // rejection sampling to avoid modulo bias
    if (n == 0) return 0;
    uint64_t threshold = (0 - n) % n;
    while (true) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

int64_t Rng::range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(bounded(static_cast<uint64_t>(hi - lo + 1)));
}

double Rng::unit() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

} // namespace repoctx
