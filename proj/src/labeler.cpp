#include "repoctx/labeler.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

using nlohmann::json;

namespace repoctx {

const char* polarity_name(Polarity p) {
    switch (p) {
        case Polarity::Positive: return "positive";
        case Polarity::Neutral: return "neutral";
        case Polarity::Negative: return "negative";
        case Polarity::Unavailable: return "unavailable";
    }
    return "unknown";
}

PolarityLabel classify(const ContributionScore& score, const LabelerConfig& cfg) {
    PolarityLabel label;
    label.score = score;
    if (score.s > cfg.t_pos) label.value = Polarity::Positive;
    else if (score.s < cfg.t_neg) label.value = Polarity::Negative;
    else label.value = Polarity::Neutral;
    return label;
}

namespace {

constexpr double kDegenerateNll = 1e-6;

double nll_of(const CompletionInstance& instance, const std::vector<KeptChunk>& chunks,
              GeneratorBackend& backend, const EngineConfig& engine_cfg) {
    PromptPlan plan = assemble_prompt(instance, chunks, backend, engine_cfg,
                                      PromptMode::Labeling);
    LikelihoodQuery q{plan.text(), instance.target_text()};
    return -backend.sequence_logprob(q).total;
}

ContributionScore score_from(double nll_without, double nll_with) {
    ContributionScore score;
    score.nll_without = nll_without;
    score.nll_with = nll_with;
    score.s = (nll_without - nll_with) / nll_without;
    return score;
}

} // namespace

ContributionScore contribution_score(const CompletionInstance& instance, const CodeChunk& chunk,
                                     GeneratorBackend& backend, const LabelerConfig&,
                                     const EngineConfig& engine_cfg) {
    if (!instance.has_target()) {
        throw Error(ErrCode::DegenerateTarget, "instance has no target to score against",
                    instance.id);
    }
    double nll_without = nll_of(instance, {}, backend, engine_cfg);
    if (nll_without < kDegenerateNll) {
        throw Error(ErrCode::DegenerateTarget,
                    "baseline NLL is ~0, contribution score undefined", instance.id);
    }
    double nll_with = nll_of(instance, {{chunk, 1}}, backend, engine_cfg);
    return score_from(nll_without, nll_with);
}

LabelRun label_chunks(const CompletionInstance& instance,
                      const std::vector<ScoredChunk>& ranked_chunks, GeneratorBackend& backend,
                      const LabelerConfig& cfg, const EngineConfig& engine_cfg) {
    if (!instance.has_target()) {
        throw Error(ErrCode::DegenerateTarget, "instance has no target to score against",
                    instance.id);
    }
    LabelRun run;
    if (ranked_chunks.empty()) return run;

    run.nll_without = nll_of(instance, {}, backend, engine_cfg);
    if (run.nll_without < kDegenerateNll) {
        throw Error(ErrCode::DegenerateTarget,
                    "baseline NLL is ~0, contribution score undefined", instance.id);
    }

    run.labeled.resize(ranked_chunks.size());
    std::vector<std::string> errors(ranked_chunks.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < static_cast<long>(ranked_chunks.size()); ++i) {
        auto idx = static_cast<size_t>(i);
        LabeledChunk& out = run.labeled[idx];
        out.chunk = ranked_chunks[idx].chunk;
        out.retrieval_rank = static_cast<int>(idx) + 1;
        try {
            double nll_with = nll_of(instance, {{out.chunk, out.retrieval_rank}}, backend,
                                     engine_cfg);
            out.label = classify(score_from(run.nll_without, nll_with), cfg);
        } catch (const Error& e) {
            out.label.value = Polarity::Unavailable;
            out.label.score = ContributionScore{0.0, run.nll_without, 0.0};
            errors[idx] = std::string(err_code_name(e.code())) + ": " + e.what();
        }
    }

    for (size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) {
            run.report.push_back(instance.id + " chunk rank " + std::to_string(i + 1) +
                                 " unavailable (" + errors[i] + ")");
        }
    }
    return run;
}

PolarityHistogram polarity_distribution(const std::vector<InstanceLabels>& corpus) {
    PolarityHistogram hist;
    hist.instances = static_cast<int>(corpus.size());
    for (const auto& inst : corpus) {
        int pos = 0, neg = 0, neu = 0;
        for (const auto& lc : inst.labeled) {
            switch (lc.label.value) {
                case Polarity::Positive: ++pos; break;
                case Polarity::Negative: ++neg; break;
                case Polarity::Neutral: ++neu; break;
                case Polarity::Unavailable: break;
            }
        }
        hist.positive[pos] += 1;
        hist.negative[neg] += 1;
        hist.neutral[neu] += 1;
    }
    return hist;
}

std::string PolarityHistogram::to_table() const {
    std::ostringstream out;
    out << "polarity distribution over " << instances << " instance(s)\n";
    auto row = [&](const char* name, const std::map<int, int>& buckets) {
        out << "  " << name << ":";
        for (const auto& [count, n] : buckets) {
            out << " " << count << "x" << n;
        }
        out << "\n";
    };
    row("positive", positive);
    row("negative", negative);
    row("neutral", neutral);
    return out.str();
}

void write_label_dump(std::ostream& out, const std::string& instance_id,
                      const std::vector<LabeledChunk>& labeled) {
    for (const auto& lc : labeled) {
        json j{{"instance_id", instance_id},
               {"path", lc.chunk.path},
               {"start_line", lc.chunk.start_line},
               {"end_line", lc.chunk.end_line},
               {"rank", lc.retrieval_rank},
               {"s", lc.label.score.s},
               {"nll_with", lc.label.score.nll_with},
               {"nll_without", lc.label.score.nll_without},
               {"label", polarity_name(lc.label.value)}};
        out << j.dump() << "\n";
    }
}

} // namespace repoctx
