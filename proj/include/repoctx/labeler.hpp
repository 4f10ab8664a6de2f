#pragma once

#include "repoctx/backend.hpp"
#include "repoctx/chunking.hpp"
#include "repoctx/corpus.hpp"
#include "repoctx/engine.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace repoctx {

struct LabelerConfig {
    double t_pos = 0.10;
    double t_neg = -0.05;

    bool valid() const { return t_neg < 0.0 && 0.0 < t_pos; }
};

// s = (nll_without - nll_with) / nll_without over positive NLL magnitudes,
// so a chunk that lowers the target's NLL scores positive.
struct ContributionScore {
    double s = 0.0;
    double nll_without = 0.0;
    double nll_with = 0.0;
};

enum class Polarity { Positive, Neutral, Negative, Unavailable };

const char* polarity_name(Polarity p);

struct PolarityLabel {
    Polarity value = Polarity::Neutral;
    ContributionScore score;
};

struct LabeledChunk {
    CodeChunk chunk;
    PolarityLabel label;
    int retrieval_rank = 1;   // 1-based
};

// Positive iff s > t_pos (strict), Negative iff s < t_neg (strict).
PolarityLabel classify(const ContributionScore& score, const LabelerConfig& cfg);

// Likelihood delta of one chunk. Prompts come from assemble_prompt in
// labeling mode with exactly the chunk under test. A baseline NLL below
// 1e-6 nats throws Error{DegenerateTarget}.
ContributionScore contribution_score(const CompletionInstance& instance, const CodeChunk& chunk,
                                     GeneratorBackend& backend, const LabelerConfig& cfg,
                                     const EngineConfig& engine_cfg);

struct LabelRun {
    std::vector<LabeledChunk> labeled;      // one per input chunk, order preserved
    std::vector<std::string> report;        // unavailable-chunk entries
    double nll_without = 0.0;
};

// Labels every retrieved chunk, computing the baseline NLL once. Chunks whose
// likelihood call fails are marked Unavailable and reported rather than
// aborting the batch.
LabelRun label_chunks(const CompletionInstance& instance,
                      const std::vector<ScoredChunk>& ranked_chunks, GeneratorBackend& backend,
                      const LabelerConfig& cfg, const EngineConfig& engine_cfg);

struct InstanceLabels {
    std::string instance_id;
    std::vector<LabeledChunk> labeled;
};

// Buckets: how many instances had exactly n positive (resp. negative,
// neutral) chunks among their retrieved candidates.
struct PolarityHistogram {
    std::map<int, int> positive;
    std::map<int, int> negative;
    std::map<int, int> neutral;
    int instances = 0;

    std::string to_table() const;
};

PolarityHistogram polarity_distribution(const std::vector<InstanceLabels>& corpus);

// Line-delimited dump: {instance_id, path, start_line, end_line, rank, s,
// nll_with, nll_without, label}.
void write_label_dump(std::ostream& out, const std::string& instance_id,
                      const std::vector<LabeledChunk>& labeled);

} // namespace repoctx
