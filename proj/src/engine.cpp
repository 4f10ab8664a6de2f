#include "repoctx/engine.hpp"
#include "repoctx/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace repoctx {

const char* stop_reason_name(StopReason reason) {
    switch (reason) {
        case StopReason::InitialEC: return "initial_ec";
        case StopReason::SufficientAfterChunk: return "sufficient_after_chunk";
        case StopReason::CandidatesExhausted: return "candidates_exhausted";
    }
    return "unknown";
}

std::string PromptPlan::text() const {
    std::string out;
    size_t total = 0;
    for (const auto& s : segments) total += s.text.size();
    out.reserve(total);
    for (const auto& s : segments) out += s.text;
    return out;
}

namespace {
std::string fmt_prob(double p) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.6f", p);
    return buf;
}
} // namespace

std::string EngineTrace::to_log() const {
    std::string out;
    for (const auto& d : decisions) {
        if (d.kind == StepKind::AdaptiveRetrieval) {
            out += "adaptive";
        } else {
            out += "judge#" + std::to_string(d.chunk_rank);
        }
        for (const auto& [tok, p] : d.probabilities.probabilities) {
            out += " " + tok + "=" + fmt_prob(p);
        }
        out += " -> " + d.chosen + "\n";
    }
    for (const auto& k : kept_chunks) {
        out += "kept " + k.chunk.path + ":" + std::to_string(k.chunk.start_line) + "-" +
               std::to_string(k.chunk.end_line) + "@" + std::to_string(k.retrieval_rank) + "\n";
    }
    out += "stopped ";
    out += stop_reason_name(stopped_reason);
    out += "\n";
    for (const auto& w : warnings) {
        out += "warn " + w + "\n";
    }
    return out;
}

std::string decide_retrieval(const std::string& prompt, GeneratorBackend& backend,
                             const EngineConfig& cfg, EngineTrace* trace) {
    EngineDecision decision;
    decision.kind = StepKind::AdaptiveRetrieval;
    try {
        decision.probabilities = backend.next_token_distribution(prompt, cfg.signal.adaptive());
        decision.chosen =
            decision.probabilities.prob(cfg.signal.mc) >= cfg.t_c ? cfg.signal.mc : cfg.signal.ec;
    } catch (const Error& e) {
        if (e.code() != ErrCode::SignalUnavailable) throw;
        decision.chosen = cfg.retrieve_on_signal_failure ? cfg.signal.mc : cfg.signal.ec;
        if (trace) {
            trace->warnings.push_back("adaptive signal unavailable, falling back to " +
                                      decision.chosen);
        }
    }
    if (trace) trace->decisions.push_back(decision);
    return decision.chosen;
}

std::string judge_chunk(const std::string& prompt_with_chunk, GeneratorBackend& backend,
                        const EngineConfig& cfg, int chunk_rank, EngineTrace* trace) {
    EngineDecision decision;
    decision.kind = StepKind::PolarityJudgment;
    decision.chunk_rank = chunk_rank;
    try {
        decision.probabilities =
            backend.next_token_distribution(prompt_with_chunk, cfg.signal.polarity());
        if (decision.probabilities.prob(cfg.signal.pos) >= cfg.t_p) {
            decision.chosen = cfg.signal.pos;
        } else if (decision.probabilities.prob(cfg.signal.neg) >= cfg.t_n) {
            decision.chosen = cfg.signal.neg;
        } else {
            decision.chosen = cfg.signal.neu;
        }
    } catch (const Error& e) {
        if (e.code() != ErrCode::SignalUnavailable) throw;
        decision.chosen = cfg.signal.neu;
        if (trace) {
            trace->warnings.push_back("polarity signal unavailable for chunk rank " +
                                      std::to_string(chunk_rank) + ", treating as neutral");
        }
    }
    if (trace) trace->decisions.push_back(decision);
    return decision.chosen;
}

// --- budgeted prompt assembly ----------------------------------------------

namespace {

std::vector<size_t> fallback_token_starts(const std::string& line) {
    std::vector<size_t> starts;
    auto is_word = [](unsigned char c) { return std::isalnum(c) || c == '_'; };
    size_t i = 0;
    while (i < line.size()) {
        unsigned char c = static_cast<unsigned char>(line[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_word(c)) {
            starts.push_back(i);
            while (i < line.size() && is_word(static_cast<unsigned char>(line[i]))) ++i;
        } else {
            starts.push_back(i);
            ++i;
        }
    }
    return starts;
}

// Keep the tail of an over-budget line, cutting at a token boundary.
std::string cut_line_head(const std::string& line, int budget) {
    if (budget <= 0) return "";
    auto starts = fallback_token_starts(line);
    if (starts.size() <= static_cast<size_t>(budget)) return line;
    return line.substr(starts[starts.size() - static_cast<size_t>(budget)]);
}

std::string cut_line_tail(const std::string& line, int budget) {
    if (budget <= 0) return "";
    auto starts = fallback_token_starts(line);
    if (starts.size() <= static_cast<size_t>(budget)) return line;
    return line.substr(0, starts[static_cast<size_t>(budget)]);
}

std::vector<int> line_costs(const std::vector<std::string>& lines, GeneratorBackend& backend) {
    std::vector<int> costs(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) costs[i] = backend.count_tokens(lines[i]);
    return costs;
}

// Maximal whole-line suffix within budget; a lone over-budget line is cut at
// its head so the tail survives verbatim.
std::string fit_suffix(const std::vector<std::string>& lines, int budget,
                       GeneratorBackend& backend) {
    if (lines.empty() || budget <= 0) return "";
    auto costs = line_costs(lines, backend);
    int acc = 0;
    size_t first = lines.size();
    while (first > 0 && acc + costs[first - 1] <= budget) {
        acc += costs[first - 1];
        --first;
    }
    if (first == lines.size()) {
        return cut_line_head(lines.back(), budget);
    }
    return join_lines(std::vector<std::string>(lines.begin() + static_cast<long>(first),
                                               lines.end()));
}

std::string fit_prefix(const std::vector<std::string>& lines, int budget,
                       GeneratorBackend& backend) {
    if (lines.empty() || budget <= 0) return "";
    auto costs = line_costs(lines, backend);
    int acc = 0;
    size_t last = 0;
    while (last < lines.size() && acc + costs[last] <= budget) {
        acc += costs[last];
        ++last;
    }
    if (last == 0) {
        return cut_line_tail(lines.front(), budget);
    }
    return join_lines(std::vector<std::string>(lines.begin(),
                                               lines.begin() + static_cast<long>(last)));
}

struct InFileRegion {
    std::string left;
    std::string right;
    int tokens = 0;
};

InFileRegion fit_in_file(const CompletionInstance& instance, GeneratorBackend& backend,
                         const EngineConfig& cfg) {
    int overhead = backend.count_tokens(cfg.fim.prefix) + backend.count_tokens(cfg.fim.suffix) +
                   backend.count_tokens(cfg.fim.middle);
    int avail = std::min(cfg.in_file_budget, cfg.max_prompt_tokens) - overhead;
    if (avail < 0) {
        throw Error(ErrCode::PromptOverflow,
                    "fill-in-the-middle markers alone exceed the in-file budget",
                    instance.id);
    }

    InFileRegion region;
    // Half the budget to each side first, then hand unused slack across.
    region.right = fit_prefix(instance.suffix_lines, avail / 2, backend);
    int right_cost = backend.count_tokens(region.right);
    region.left = fit_suffix(instance.prefix_lines, avail - right_cost, backend);
    int left_cost = backend.count_tokens(region.left);
    region.right = fit_prefix(instance.suffix_lines, avail - left_cost, backend);
    right_cost = backend.count_tokens(region.right);
    region.tokens = overhead + left_cost + right_cost;
    return region;
}

} // namespace

PromptPlan assemble_prompt(const CompletionInstance& instance, const std::vector<KeptChunk>& kept,
                           GeneratorBackend& backend, const EngineConfig& cfg, PromptMode) {
    if (!cfg.valid()) {
        throw Error(ErrCode::UsageError, "engine budgets are inconsistent");
    }
    InFileRegion in_file = fit_in_file(instance, backend, cfg);

    // Cross-file region: drop the worst-ranked chunks until it fits.
    std::vector<KeptChunk> chunks = kept;
    int cross_budget = std::min(cfg.cross_file_budget, cfg.max_prompt_tokens - in_file.tokens);
    std::string banner = std::string(kCrossFileBanner) + "\n";
    int banner_cost = backend.count_tokens(banner);

    std::vector<std::string> blocks;
    std::vector<int> block_costs;
    auto rebuild = [&] {
        blocks.clear();
        block_costs.clear();
        for (const auto& k : chunks) {
            blocks.push_back(render_chunk_block(k.chunk));
            block_costs.push_back(backend.count_tokens(blocks.back()));
        }
    };
    rebuild();
    auto cross_total = [&] {
        if (chunks.empty()) return 0;
        int t = banner_cost;
        for (int c : block_costs) t += c;
        return t;
    };
    while (!chunks.empty() && cross_total() > cross_budget) {
        size_t worst = 0;
        for (size_t i = 1; i < chunks.size(); ++i) {
            if (chunks[i].retrieval_rank >= chunks[worst].retrieval_rank) worst = i;
        }
        chunks.erase(chunks.begin() + static_cast<long>(worst));
        rebuild();
    }

    PromptPlan plan;
    if (!chunks.empty()) {
        plan.segments.push_back(context_segment(SegRole::ChunkBody, banner));
        for (const auto& b : blocks) {
            plan.segments.push_back(context_segment(SegRole::ChunkBody, b));
        }
    }
    plan.segments.push_back(context_segment(SegRole::PrefixMarker, cfg.fim.prefix));
    plan.segments.push_back(context_segment(SegRole::LeftContext, in_file.left));
    plan.segments.push_back(context_segment(SegRole::SuffixMarker, cfg.fim.suffix));
    plan.segments.push_back(context_segment(SegRole::RightContext, in_file.right));
    plan.segments.push_back(context_segment(SegRole::MiddleMarker, cfg.fim.middle));

    plan.token_counts.in_file = in_file.tokens;
    plan.token_counts.cross_file = cross_total();
    plan.token_counts.total = plan.token_counts.in_file + plan.token_counts.cross_file;
    return plan;
}

// --- filter-then-generate loop -----------------------------------------------

namespace {

struct EngineOutput {
    EngineTrace trace;
    PromptPlan plan;
};

EngineOutput run_filter(const CompletionInstance& instance, const CrossFileIndex& index,
                        GeneratorBackend& backend, const EngineConfig& cfg) {
    EngineOutput out;
    InFileRegion in_file = fit_in_file(instance, backend, cfg);

    // Decision stream in training order: in-file context, then each accepted
    // chunk wrapped in <MC> ... <pos>.
    std::string stream = cfg.fim.prefix + in_file.left + cfg.fim.suffix + in_file.right;
    std::vector<KeptChunk> in_prompt;   // what the final prompt will carry

    std::string m = decide_retrieval(stream, backend, cfg, &out.trace);
    if (m == cfg.signal.ec) {
        out.trace.stopped_reason = StopReason::InitialEC;
    } else {
        RetrievalResult retrieved =
            retrieve(index, instance.prefix_lines, cfg.top_k, cfg.query_window);
        out.trace.stopped_reason = StopReason::CandidatesExhausted;
        for (size_t i = 0; i < retrieved.ranked.size(); ++i) {
            const CodeChunk& chunk = retrieved.ranked[i].chunk;
            int rank = static_cast<int>(i) + 1;
            std::string block = cfg.signal.mc + "\n" + render_chunk_block(chunk);
            std::string verdict = judge_chunk(stream + block, backend, cfg, rank, &out.trace);
            if (verdict == cfg.signal.pos) {
                out.trace.kept_chunks.push_back({chunk, rank});
                in_prompt.push_back({chunk, rank});
                stream += block + cfg.signal.pos + "\n";
                m = decide_retrieval(stream, backend, cfg, &out.trace);
                if (m == cfg.signal.ec) {
                    out.trace.stopped_reason = StopReason::SufficientAfterChunk;
                    break;
                }
            } else if (cfg.keep_judged_inline) {
                // Transcript-compatibility mode: rejected chunks stay visible
                // to later decisions and in the final prompt.
                in_prompt.push_back({chunk, rank});
                stream += block + verdict + "\n";
            }
        }
    }

    out.plan = assemble_prompt(instance, in_prompt, backend, cfg, PromptMode::Inference);
    return out;
}

} // namespace

CompletionResult run(const CompletionInstance& instance, const CrossFileIndex& index,
                     GeneratorBackend& backend, const EngineConfig& cfg) {
    EngineOutput out = run_filter(instance, index, backend, cfg);
    CompletionResult result;
    result.instance_id = instance.id;
    result.trace = std::move(out.trace);
    result.prompt = std::move(out.plan);
    result.generated = backend.complete(result.prompt.text(), cfg.max_generation_tokens,
                                        cfg.stop_sequences);
    return result;
}

FilteredPrompt export_filtered_prompt(const CompletionInstance& instance,
                                      const CrossFileIndex& index, GeneratorBackend& backend,
                                      const EngineConfig& cfg) {
    EngineOutput out = run_filter(instance, index, backend, cfg);
    FilteredPrompt fp;
    fp.instance_id = instance.id;
    fp.prompt = std::move(out.plan);
    fp.trace = std::move(out.trace);
    return fp;
}

} // namespace repoctx
