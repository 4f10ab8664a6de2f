#include "repoctx/chunking.hpp"
#include "repoctx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <ostream>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

using nlohmann::json;

namespace repoctx {

std::string CodeChunk::text() const {
    return join_lines(lines);
}

std::vector<CodeChunk> chunk_file(const SourceFile& file, const ChunkerConfig& cfg) {
    std::vector<CodeChunk> chunks;
    const int L = static_cast<int>(file.lines.size());
    if (L == 0) return chunks;
    const int w = cfg.window;
    const int s = cfg.stride;
    const int last_start = std::max(1, L - w + 1);

    auto emit = [&](int start) {
        CodeChunk c;
        c.path = file.path;
        c.start_line = start;
        c.end_line = std::min(start + w - 1, L);
        c.lines.assign(file.lines.begin() + (start - 1), file.lines.begin() + c.end_line);
        c.token_set = tokenize_set(c.text());
        chunks.push_back(std::move(c));
    };

    int start = 1;
    for (; start <= last_start; start += s) emit(start);
    if (start - s != last_start) emit(last_start);   // clamp chunk covering the tail
    return chunks;
}

double JaccardScorer::score(const std::vector<std::string>& query_tokens,
                            const CodeChunk& chunk) const {
    return jaccard(query_tokens, chunk.token_set);
}

CrossFileIndex build_index(const RepoSnapshot& repo, const std::string& exclude_path,
                           const ChunkerConfig& cfg) {
    std::vector<const SourceFile*> files;
    for (const auto& f : repo.files) {
        if (f.path != exclude_path) files.push_back(&f);
    }

    std::vector<std::vector<CodeChunk>> per_file(files.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < static_cast<long>(files.size()); ++i) {
        per_file[static_cast<size_t>(i)] = chunk_file(*files[static_cast<size_t>(i)], cfg);
    }

    CrossFileIndex index;
    for (auto& v : per_file) {
        for (auto& c : v) index.chunks_.push_back(std::move(c));
    }

    // Intern tokens so scoring compares integer ids, not strings.
    std::unordered_map<std::string, uint32_t> ids;
    for (const auto& c : index.chunks_) {
        for (const auto& t : c.token_set) ids.emplace(t, 0);
    }
    index.vocab_.reserve(ids.size());
    for (const auto& [tok, _] : ids) index.vocab_.push_back(tok);
    std::sort(index.vocab_.begin(), index.vocab_.end());
    for (uint32_t i = 0; i < index.vocab_.size(); ++i) ids[index.vocab_[i]] = i;

    index.chunk_ids_.resize(index.chunks_.size());
    for (size_t i = 0; i < index.chunks_.size(); ++i) {
        auto& dst = index.chunk_ids_[i];
        dst.reserve(index.chunks_[i].token_set.size());
        for (const auto& t : index.chunks_[i].token_set) dst.push_back(ids[t]);
        std::sort(dst.begin(), dst.end());
    }
    return index;
}

std::vector<uint32_t> CrossFileIndex::intern_query(const std::vector<std::string>& tokens) const {
    // Tokens absent from the vocabulary contribute only to the union; callers
    // pass the count of unmatched tokens separately via the size difference.
    std::vector<uint32_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        auto it = std::lower_bound(vocab_.begin(), vocab_.end(), t);
        if (it != vocab_.end() && *it == t) {
            out.push_back(static_cast<uint32_t>(it - vocab_.begin()));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

double jaccard_ids(const std::vector<uint32_t>& a, size_t a_total,
                   const std::vector<uint32_t>& b) {
    if (a_total == 0 && b.empty()) return 0.0;
    size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) { ++common; ++i; ++j; }
        else if (a[i] < b[j]) ++i;
        else ++j;
    }
    size_t uni = a_total + b.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

} // namespace

std::vector<double> CrossFileIndex::score_all(const std::vector<std::string>& query_tokens) const {
    auto query_ids = intern_query(query_tokens);
    std::vector<double> scores(chunks_.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < static_cast<long>(chunks_.size()); ++i) {
        scores[static_cast<size_t>(i)] =
            jaccard_ids(query_ids, query_tokens.size(), chunk_ids_[static_cast<size_t>(i)]);
    }
    return scores;
}

std::vector<double>
CrossFileIndex::score_all_serial(const std::vector<std::string>& query_tokens) const {
    std::vector<double> scores(chunks_.size(), 0.0);
    JaccardScorer scorer;
    for (size_t i = 0; i < chunks_.size(); ++i) {
        scores[i] = scorer.score(query_tokens, chunks_[i]);
    }
    return scores;
}

void CrossFileIndex::dump_jsonl(std::ostream& out) const {
    for (const auto& c : chunks_) {
        json j{{"path", c.path},
               {"start_line", c.start_line},
               {"end_line", c.end_line},
               {"tokens", c.token_set}};
        out << j.dump() << "\n";
    }
}

namespace {

std::vector<std::string> query_tail(const std::vector<std::string>& prefix_lines,
                                    int query_window) {
    size_t n = prefix_lines.size();
    size_t take = std::min<size_t>(n, static_cast<size_t>(std::max(0, query_window)));
    return std::vector<std::string>(prefix_lines.end() - static_cast<long>(take),
                                    prefix_lines.end());
}

RetrievalResult rank_top_k(const CrossFileIndex& index, std::vector<std::string> query_lines,
                           const std::vector<double>& scores, int k) {
    RetrievalResult result;
    result.k = k;
    result.query_lines = std::move(query_lines);

    std::vector<size_t> order(index.size());
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        const auto& ca = index.chunks()[a];
        const auto& cb = index.chunks()[b];
        if (ca.path != cb.path) return ca.path < cb.path;
        return ca.start_line < cb.start_line;
    };
    size_t take = std::min<size_t>(static_cast<size_t>(std::max(0, k)), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(take), order.end(), better);

    result.ranked.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        result.ranked.push_back({index.chunks()[order[i]], scores[order[i]]});
    }
    return result;
}

} // namespace

RetrievalResult retrieve(const CrossFileIndex& index,
                         const std::vector<std::string>& prefix_lines, int k, int query_window) {
    auto query_lines = query_tail(prefix_lines, query_window);
    auto scores = index.score_all(tokenize_set(join_lines(query_lines)));
    return rank_top_k(index, std::move(query_lines), scores, k);
}

RetrievalResult retrieve_serial(const CrossFileIndex& index,
                                const std::vector<std::string>& prefix_lines, int k,
                                int query_window) {
    auto query_lines = query_tail(prefix_lines, query_window);
    auto scores = index.score_all_serial(tokenize_set(join_lines(query_lines)));
    return rank_top_k(index, std::move(query_lines), scores, k);
}

} // namespace repoctx
