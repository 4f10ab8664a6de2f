#include "repoctx/eval.hpp"
#include "repoctx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

using nlohmann::json;

namespace repoctx {

std::string normalize_completion(const std::string& text) {
    std::vector<std::string> lines = split_lines(text);
    for (auto& l : lines) l = strip(l);
    size_t begin = 0, end = lines.size();
    while (begin < end && lines[begin].empty()) ++begin;
    while (end > begin && lines[end - 1].empty()) --end;
    return join_lines(std::vector<std::string>(lines.begin() + static_cast<long>(begin),
                                               lines.begin() + static_cast<long>(end)));
}

bool exact_match(const std::string& pred, const std::string& ref) {
    return normalize_completion(pred) == normalize_completion(ref);
}

size_t levenshtein(const std::string& a, const std::string& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double edit_similarity(const std::string& pred, const std::string& ref) {
    std::string p = normalize_completion(pred);
    std::string r = normalize_completion(ref);
    size_t longest = std::max(p.size(), r.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(p, r)) / static_cast<double>(longest);
}

const char* strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::NoRetrieve: return "no_retrieve";
        case StrategyKind::FullRetrieve: return "full_retrieve";
        case StrategyKind::Filtered: return "filtered";
        case StrategyKind::ExternalPromptReplay: return "external_prompt_replay";
    }
    return "unknown";
}

void EvalReport::recompute() {
    std::sort(rows.begin(), rows.end(),
              [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
    failed_count = 0;
    int ok = 0;
    double em_sum = 0.0, es_sum = 0.0, cf_sum = 0.0, sig_sum = 0.0;
    for (const auto& r : rows) {
        if (r.failed) {
            ++failed_count;
            continue;
        }
        ++ok;
        em_sum += r.em ? 1.0 : 0.0;
        es_sum += r.es;
        cf_sum += r.cross_file_tokens;
        sig_sum += r.signal_tokens_generated;
    }
    if (ok > 0) {
        em_pct = 100.0 * em_sum / ok;
        es_mean_pct = 100.0 * es_sum / ok;
        mean_cross_file_tokens = cf_sum / ok;
        mean_signal_tokens = sig_sum / ok;
    } else {
        em_pct = es_mean_pct = mean_cross_file_tokens = mean_signal_tokens = 0.0;
    }
}

std::string EvalReport::to_jsonl() const {
    std::string out;
    for (const auto& r : rows) {
        json j{{"id", r.id},
               {"strategy", r.strategy},
               {"em", r.em},
               {"es", r.es},
               {"cross_file_tokens", r.cross_file_tokens},
               {"signal_tokens_generated", r.signal_tokens_generated}};
        if (r.failed) j["error"] = r.error;
        out += j.dump();
        out += "\n";
    }
    return out;
}

std::string EvalReport::summary_line() const {
    char buf[256];
    snprintf(buf, sizeof(buf),
             "%-24s em=%6.2f%%  es=%6.2f%%  cross_file_tokens=%8.1f  signal_tokens=%5.2f  "
             "failed=%d",
             strategy.c_str(), em_pct, es_mean_pct, mean_cross_file_tokens, mean_signal_tokens,
             failed_count);
    return buf;
}

namespace {

struct ReplayManifest {
    std::map<std::string, std::string> prompt_files;
    std::map<std::string, TokenCounts> counts;
};

ReplayManifest load_manifest(const std::string& dir) {
    ReplayManifest m;
    std::ifstream in(dir + "/manifest.jsonl");
    if (!in) {
        throw Error(ErrCode::IoError, "cannot read prompt manifest in " + dir);
    }
    std::string line;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        json j = json::parse(line);
        std::string id = j.at("id");
        m.prompt_files[id] = dir + "/" + j.at("file").get<std::string>();
        TokenCounts tc;
        tc.in_file = j.value("in_file_tokens", 0);
        tc.cross_file = j.value("cross_file_tokens", 0);
        tc.total = j.value("total_tokens", tc.in_file + tc.cross_file);
        m.counts[id] = tc;
    }
    return m;
}

std::string read_file_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrCode::IoError, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

EvalRow eval_one(const CompletionInstance& inst, const RepoSnapshot& repo,
                 GeneratorBackend& backend, const StrategySpec& spec,
                 const ReplayManifest* manifest) {
    EvalRow row;
    row.id = inst.id;
    row.strategy = strategy_name(spec.kind);

    std::string generated;
    switch (spec.kind) {
        case StrategyKind::NoRetrieve: {
            PromptPlan plan = assemble_prompt(inst, {}, backend, spec.engine,
                                              PromptMode::Inference);
            generated = backend.complete(plan.text(), spec.engine.max_generation_tokens,
                                         spec.engine.stop_sequences);
            row.cross_file_tokens = plan.token_counts.cross_file;
            break;
        }
        case StrategyKind::FullRetrieve: {
            CrossFileIndex index = build_index(repo, inst.target_path, spec.chunker);
            RetrievalResult retrieved = retrieve(index, inst.prefix_lines, spec.engine.top_k,
                                                 spec.engine.query_window);
            std::vector<KeptChunk> kept;
            for (size_t i = 0; i < retrieved.ranked.size(); ++i) {
                kept.push_back({retrieved.ranked[i].chunk, static_cast<int>(i) + 1});
            }
            PromptPlan plan = assemble_prompt(inst, kept, backend, spec.engine,
                                              PromptMode::Inference);
            generated = backend.complete(plan.text(), spec.engine.max_generation_tokens,
                                         spec.engine.stop_sequences);
            row.cross_file_tokens = plan.token_counts.cross_file;
            break;
        }
        case StrategyKind::Filtered: {
            CrossFileIndex index = build_index(repo, inst.target_path, spec.chunker);
            CompletionResult result = run(inst, index, backend, spec.engine);
            generated = result.generated;
            row.cross_file_tokens = result.prompt.token_counts.cross_file;
            row.signal_tokens_generated = static_cast<int>(result.trace.decisions.size());
            break;
        }
        case StrategyKind::ExternalPromptReplay: {
            auto it = manifest->prompt_files.find(inst.id);
            if (it == manifest->prompt_files.end()) {
                throw Error(ErrCode::IoError, "no exported prompt for instance", inst.id);
            }
            std::string prompt = read_file_text(it->second);
            generated = backend.complete(prompt, spec.engine.max_generation_tokens,
                                         spec.engine.stop_sequences);
            row.cross_file_tokens = manifest->counts.at(inst.id).cross_file;
            break;
        }
    }

    row.em = exact_match(generated, inst.target_text());
    row.es = edit_similarity(generated, inst.target_text());
    return row;
}

} // namespace

EvalReport run_strategy(const std::vector<CompletionInstance>& instances,
                        const RepoSnapshot& repo, GeneratorBackend& backend,
                        const StrategySpec& spec) {
    for (const auto& inst : instances) {
        if (!inst.has_target()) {
            throw Error(ErrCode::DegenerateTarget, "evaluation requires targets", inst.id);
        }
    }
    ReplayManifest manifest;
    if (spec.kind == StrategyKind::ExternalPromptReplay) {
        manifest = load_manifest(spec.prompt_dir);
    }

    EvalReport report;
    report.strategy = strategy_name(spec.kind);
    report.rows.resize(instances.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
        auto idx = static_cast<size_t>(i);
        try {
            report.rows[idx] = eval_one(instances[idx], repo, backend, spec, &manifest);
        } catch (const Error& e) {
            EvalRow row;
            row.id = instances[idx].id;
            row.strategy = strategy_name(spec.kind);
            row.failed = true;
            row.error = std::string(err_code_name(e.code())) + ": " + e.what();
            report.rows[idx] = std::move(row);
        } catch (const std::exception& e) {
            EvalRow row;
            row.id = instances[idx].id;
            row.strategy = strategy_name(spec.kind);
            row.failed = true;
            row.error = e.what();
            report.rows[idx] = std::move(row);
        }
    }
    report.recompute();
    return report;
}

std::vector<CompletionInstance> negative_subset(const std::vector<CompletionInstance>& instances,
                                                const std::vector<InstanceLabels>& labels) {
    std::map<std::string, const InstanceLabels*> by_id;
    for (const auto& l : labels) by_id[l.instance_id] = &l;

    std::vector<CompletionInstance> subset;
    for (const auto& inst : instances) {
        auto it = by_id.find(inst.id);
        if (it == by_id.end()) continue;
        bool has_negative = std::any_of(
            it->second->labeled.begin(), it->second->labeled.end(),
            [](const LabeledChunk& lc) { return lc.label.value == Polarity::Negative; });
        if (has_negative) subset.push_back(inst);
    }
    return subset;
}

LengthReport length_report(const std::vector<EvalReport>& reports) {
    if (!reports.empty()) {
        std::vector<std::string> reference;
        for (const auto& r : reports[0].rows) reference.push_back(r.id);
        for (const auto& rep : reports) {
            std::vector<std::string> ids;
            for (const auto& r : rep.rows) ids.push_back(r.id);
            if (ids != reference) {
                throw Error(ErrCode::MismatchedReports,
                            "length report requires identical instance sets per strategy");
            }
        }
    }

    LengthReport out;
    double full = -1.0, filtered = -1.0;
    for (const auto& rep : reports) {
        out.rows.push_back({rep.strategy, rep.mean_cross_file_tokens});
        if (rep.strategy == strategy_name(StrategyKind::FullRetrieve)) {
            full = rep.mean_cross_file_tokens;
        }
        if (rep.strategy == strategy_name(StrategyKind::Filtered)) {
            filtered = rep.mean_cross_file_tokens;
        }
    }
    if (full > 0.0 && filtered >= 0.0) {
        out.filtered_over_full = filtered / full;
    }
    return out;
}

std::string LengthReport::to_table() const {
    std::ostringstream out;
    out << "mean cross-file tokens per strategy\n";
    for (const auto& r : rows) {
        char buf[128];
        snprintf(buf, sizeof(buf), "  %-24s %10.1f\n", r.strategy.c_str(),
                 r.mean_cross_file_tokens);
        out << buf;
    }
    if (filtered_over_full > 0.0) {
        char buf[64];
        snprintf(buf, sizeof(buf), "  filtered/full ratio: %.3f\n", filtered_over_full);
        out << buf;
    }
    return out.str();
}

} // namespace repoctx
