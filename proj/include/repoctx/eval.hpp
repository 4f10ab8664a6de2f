#pragma once

#include "repoctx/backend.hpp"
#include "repoctx/corpus.hpp"
#include "repoctx/engine.hpp"
#include "repoctx/labeler.hpp"

#include <string>
#include <vector>

namespace repoctx {

// Shared metric normalization: strip each line's edges, drop blank boundary
// lines. EM and ES both compare normalized text, so EM implies ES = 1.
std::string normalize_completion(const std::string& text);

bool exact_match(const std::string& pred, const std::string& ref);

size_t levenshtein(const std::string& a, const std::string& b);

// 1 - levenshtein / max(len); 1 when both sides normalize to empty.
double edit_similarity(const std::string& pred, const std::string& ref);

enum class StrategyKind { NoRetrieve, FullRetrieve, Filtered, ExternalPromptReplay };

const char* strategy_name(StrategyKind kind);

struct StrategySpec {
    StrategyKind kind = StrategyKind::Filtered;
    EngineConfig engine;
    ChunkerConfig chunker;
    std::string prompt_dir;   // ExternalPromptReplay: directory with manifest.jsonl
};

struct EvalRow {
    std::string id;
    std::string strategy;
    bool em = false;
    double es = 0.0;
    int cross_file_tokens = 0;
    int signal_tokens_generated = 0;
    bool failed = false;
    std::string error;
};

struct EvalReport {
    std::string strategy;
    std::vector<EvalRow> rows;   // sorted by instance id
    int failed_count = 0;
    double em_pct = 0.0;
    double es_mean_pct = 0.0;
    double mean_cross_file_tokens = 0.0;
    double mean_signal_tokens = 0.0;

    void recompute();
    std::string to_jsonl() const;
    std::string summary_line() const;
};

// Runs one retrieval strategy over the instance set. Per-instance backend
// failures become row-level errors excluded from aggregates.
EvalReport run_strategy(const std::vector<CompletionInstance>& instances,
                        const RepoSnapshot& repo, GeneratorBackend& backend,
                        const StrategySpec& spec);

// Instances whose labeled top-k carries at least one Negative chunk.
std::vector<CompletionInstance> negative_subset(const std::vector<CompletionInstance>& instances,
                                                const std::vector<InstanceLabels>& labels);

struct LengthReport {
    struct Row {
        std::string strategy;
        double mean_cross_file_tokens = 0.0;
    };
    std::vector<Row> rows;
    double filtered_over_full = 0.0;   // 0 when either side is missing

    std::string to_table() const;
};

// Requires every report to cover the same instance ids; otherwise throws
// Error{MismatchedReports}.
LengthReport length_report(const std::vector<EvalReport>& reports);

} // namespace repoctx
