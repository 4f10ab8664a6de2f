#pragma once

#include "repoctx/corpus.hpp"
#include "repoctx/labeler.hpp"
#include "repoctx/prompt.hpp"
#include "repoctx/text.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace repoctx {

enum class TargetKind { SingleLine, Chunk, Function };

struct SamplingConfig {
    int targets_per_repo = 10;
    double weight_single = 1.0;
    double weight_chunk = 1.0;
    double weight_function = 1.0;
    int chunk_min_lines = 2;
    int chunk_max_lines = 20;
    int function_max_lines = 50;
    double infill_fraction = 0.5;   // remainder is left-to-right
    uint64_t rng_seed = 0;
    int min_local_imports = 3;
};

struct SampleResult {
    std::vector<CompletionInstance> instances;
    std::vector<std::string> report;
};

// Draws completion targets from files with enough local imports, rejecting
// ineligible spans. Deterministic under rng_seed.
SampleResult sample_targets(const RepoSnapshot& repo, const SamplingConfig& cfg);

// Appendix-style quality gate on the span itself: not all-blank/comment, no
// import lines, at least six tokens counted with multiplicity.
bool is_eligible_target(const std::vector<std::string>& target_lines);

// The instance is learnable: some positive chunk, or some in-file window of
// the target's height, resembles the target above the edit-similarity bar.
bool sufficiency_filter(const CompletionInstance& instance,
                        const std::vector<LabeledChunk>& labeled, double threshold = 0.5);

enum class RecordFormat { AllCandidates, PositiveOnly };

const char* record_format_name(RecordFormat format);
bool parse_record_format(const std::string& name, RecordFormat& out);

struct TrainingRecord {
    std::string instance_id;
    RecordFormat format = RecordFormat::PositiveOnly;
    std::vector<Segment> segments;
};

struct VerbalizeSpec {
    FimMarkers fim;
    SignalTokens signal;
    double lambda = 2.0;   // loss weight on signal tokens
};

// AllCandidates: every labeled chunk, shuffled, with one randomly chosen
// positive moved last, each wrapped <MC>[chunk]<polarity>, closed by <EC> and
// the middle marker (no target). PositiveOnly: positives in rank order, each
// tagged <pos>, then <EC>, middle marker and the target; with no positives
// the chunk sequence is a bare <EC>. Unavailable chunks never enter records.
TrainingRecord verbalize(const CompletionInstance& instance,
                         const std::vector<LabeledChunk>& labeled, RecordFormat format,
                         const VerbalizeSpec& spec, Rng& rng);

// Role-grammar and supervision-mask validity; returns an explanation for the
// first violation.
bool validate_record(const TrainingRecord& record, const VerbalizeSpec& spec,
                     std::string* why = nullptr);

// One JSON object per line; an empty set still writes a header comment so
// the file is self-describing.
void export_records(const std::vector<TrainingRecord>& records, std::ostream& out);

// Streaming loader: records are handed to the sink one at a time.
void for_each_record(std::istream& in, const std::function<void(TrainingRecord&&)>& sink);

} // namespace repoctx
