#pragma once

#include "repoctx/backend.hpp"
#include "repoctx/chunking.hpp"
#include "repoctx/corpus.hpp"
#include "repoctx/prompt.hpp"

#include <string>
#include <vector>

namespace repoctx {

struct EngineConfig {
    double t_c = 0.3;              // P(<MC>) >= t_c requests retrieval
    double t_p = 0.3;              // P(<pos>) >= t_p keeps a chunk
    double t_n = 0.3;              // P(<neg>) >= t_n rejects it as harmful
    int max_prompt_tokens = 4096;
    int in_file_budget = 1024;
    int cross_file_budget = 3072;
    int top_k = 10;
    int query_window = 10;
    int max_generation_tokens = 256;
    std::vector<std::string> stop_sequences;
    bool retrieve_on_signal_failure = true;   // adaptive fallback: <MC>
    bool keep_judged_inline = false;          // transcript-compatibility mode
    FimMarkers fim;
    SignalTokens signal;

    bool valid() const {
        return in_file_budget + cross_file_budget <= max_prompt_tokens && t_c >= 0.0 &&
               t_c <= 1.0 && t_p >= 0.0 && t_p <= 1.0 && t_n >= 0.0 && t_n <= 1.0;
    }
};

enum class PromptMode { Inference, Labeling, Export };

struct KeptChunk {
    CodeChunk chunk;
    int retrieval_rank = 1;   // 1-based rank from the retriever
};

struct TokenCounts {
    int in_file = 0;
    int cross_file = 0;
    int total = 0;
};

struct PromptPlan {
    std::vector<Segment> segments;
    TokenCounts token_counts;

    std::string text() const;
};

enum class StepKind { AdaptiveRetrieval, PolarityJudgment };

struct EngineDecision {
    StepKind kind;
    SignalDistribution probabilities;
    std::string chosen;
    int chunk_rank = 0;   // candidate rank for judgments, 0 for adaptive steps
};

enum class StopReason { InitialEC, SufficientAfterChunk, CandidatesExhausted };

const char* stop_reason_name(StopReason reason);

struct EngineTrace {
    std::vector<EngineDecision> decisions;
    std::vector<KeptChunk> kept_chunks;   // accepted (<pos>) chunks in order
    StopReason stopped_reason = StopReason::InitialEC;
    std::vector<std::string> warnings;

    // Canonical one-line-per-decision form used by golden-trace tests.
    std::string to_log() const;
};

struct CompletionResult {
    std::string instance_id;
    std::string generated;
    EngineTrace trace;
    PromptPlan prompt;
};

// Adaptive-retrieval decision over {<EC>, <MC>}; returns <MC> iff
// P(<MC>) >= t_c. Signal failure falls back per config (retrieve-on-doubt).
std::string decide_retrieval(const std::string& prompt, GeneratorBackend& backend,
                             const EngineConfig& cfg, EngineTrace* trace = nullptr);

// Polarity judgment over {<pos>, <neg>, <neu>} with <pos> priority; signal
// failure degrades to <neu> with a warning.
std::string judge_chunk(const std::string& prompt_with_chunk, GeneratorBackend& backend,
                        const EngineConfig& cfg, int chunk_rank, EngineTrace* trace = nullptr);

// Budgeted prompt: cross-file comment block first, then FIM markers around
// the in-file context. Left context is truncated from its start, right from
// its end; kept chunks are dropped worst-retrieval-rank-first until the
// cross-file region fits. Throws Error{PromptOverflow} when even the bare
// markers exceed the budget.
PromptPlan assemble_prompt(const CompletionInstance& instance,
                           const std::vector<KeptChunk>& kept, GeneratorBackend& backend,
                           const EngineConfig& cfg, PromptMode mode);

// The filter-then-generate loop: initial sufficiency decision, on <MC>
// retrieve top-k and judge chunks in rank order, append positives, reassess
// after each accepted chunk, then generate from the assembled prompt.
CompletionResult run(const CompletionInstance& instance, const CrossFileIndex& index,
                     GeneratorBackend& backend, const EngineConfig& cfg);

// Identical filtering path, stopping short of generation; the produced plan
// feeds external models.
struct FilteredPrompt {
    std::string instance_id;
    PromptPlan prompt;
    EngineTrace trace;
};

FilteredPrompt export_filtered_prompt(const CompletionInstance& instance,
                                      const CrossFileIndex& index, GeneratorBackend& backend,
                                      const EngineConfig& cfg);

} // namespace repoctx
