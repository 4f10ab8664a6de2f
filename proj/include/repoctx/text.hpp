#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace repoctx {

// Splits on '\n' keeping every segment, so join_lines(split_lines(s)) == s
// byte for byte (a trailing newline yields a final empty line).
std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines);

// Replaces invalid UTF-8 sequences with U+FFFD. Returns the sanitized text
// and reports via `had_invalid` whether any replacement happened.
std::string utf8_sanitize(std::string_view bytes, bool* had_invalid = nullptr);

// Identifier-oriented tokens: maximal runs of [A-Za-z0-9_], case-sensitive.
std::vector<std::string> tokenize_all(std::string_view text);     // with multiplicity
std::vector<std::string> tokenize_set(std::string_view text);     // sorted, deduped

// Local token-count approximation: one token per identifier run, one per
// remaining non-whitespace character.
int fallback_token_count(std::string_view text);

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

std::string strip(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

uint64_t fnv1a64(std::string_view data);

// mt19937_64 plus hand-rolled bounded draws; std:: distributions are not
// portable across standard libraries and fixtures must be byte-stable.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64();
    // uniform in [0, n), n > 0
    uint64_t bounded(uint64_t n);
    // uniform in [lo, hi] inclusive
    int64_t range(int64_t lo, int64_t hi);
    // uniform in [0, 1)
    double unit();
    bool bernoulli(double p) { return unit() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(bounded(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    uint64_t state_;
};

} // namespace repoctx
