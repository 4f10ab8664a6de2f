#pragma once

#include "repoctx/corpus.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace repoctx {

struct ChunkerConfig {
    int window = 10;
    int stride = 5;

    bool valid() const { return stride >= 1 && stride <= window; }
};

struct CodeChunk {
    std::string path;
    int start_line = 1;   // 1-based inclusive
    int end_line = 1;     // 1-based inclusive
    std::vector<std::string> lines;
    std::vector<std::string> token_set;   // sorted, deduped

    std::string text() const;
    int line_count() const { return end_line - start_line + 1; }
};

// Window starts are 1, 1+s, 1+2s, ... while start <= max(1, L-w+1); a final
// clamp chunk [L-w+1, L] is appended when the stride never reached it, so
// tail lines always stay retrievable. Empty file yields no chunks.
std::vector<CodeChunk> chunk_file(const SourceFile& file, const ChunkerConfig& cfg);

struct ScoredChunk {
    CodeChunk chunk;
    double score = 0.0;
};

struct RetrievalResult {
    std::vector<std::string> query_lines;
    std::vector<ScoredChunk> ranked;   // score desc, ties by (path, start_line)
    int k = 0;
};

// Pluggable similarity so dense scorers can replace Jaccard later.
class ChunkScorer {
public:
    virtual ~ChunkScorer() = default;
    virtual double score(const std::vector<std::string>& query_tokens,
                         const CodeChunk& chunk) const = 0;
};

class JaccardScorer final : public ChunkScorer {
public:
    double score(const std::vector<std::string>& query_tokens,
                 const CodeChunk& chunk) const override;
};

class CrossFileIndex {
public:
    CrossFileIndex() = default;

    const std::vector<CodeChunk>& chunks() const { return chunks_; }
    size_t size() const { return chunks_.size(); }
    bool empty() const { return chunks_.empty(); }

    // Jaccard scores for a query against every chunk, via interned token ids.
    std::vector<double> score_all(const std::vector<std::string>& query_tokens) const;
    std::vector<double> score_all_serial(const std::vector<std::string>& query_tokens) const;

    void dump_jsonl(std::ostream& out) const;

    friend CrossFileIndex build_index(const RepoSnapshot&, const std::string&,
                                      const ChunkerConfig&);

private:
    std::vector<CodeChunk> chunks_;
    std::vector<std::vector<uint32_t>> chunk_ids_;     // sorted token ids per chunk
    std::vector<std::string> vocab_;                   // sorted token strings

    std::vector<uint32_t> intern_query(const std::vector<std::string>& tokens) const;
};

// Chunks every repo file except exclude_path (the instance's own file).
CrossFileIndex build_index(const RepoSnapshot& repo, const std::string& exclude_path,
                           const ChunkerConfig& cfg);

// Query is the last query_window lines of the prefix. OpenMP-parallel
// scoring; retrieve_serial is the reference kept for tests and benchmarks.
RetrievalResult retrieve(const CrossFileIndex& index,
                         const std::vector<std::string>& prefix_lines,
                         int k = 10, int query_window = 10);
RetrievalResult retrieve_serial(const CrossFileIndex& index,
                                const std::vector<std::string>& prefix_lines,
                                int k = 10, int query_window = 10);

} // namespace repoctx
