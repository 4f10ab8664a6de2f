#pragma once

#include "repoctx/backend.hpp"
#include "repoctx/corpus.hpp"
#include "repoctx/labeler.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace repoctx {

// How many chunks of each polarity to plant per instance. Helpful chunks
// share tokens with the target, misleading chunks share tokens with the
// query but carry decoy tokens, irrelevant chunks share only query tokens.
struct PlantSpec {
    int helpful = 1;
    int misleading = 1;
    int irrelevant = 8;

    int total() const { return helpful + misleading + irrelevant; }
};

struct SynthConfig {
    uint64_t seed = 1;
    int n_instances = 10;
    PlantSpec plant;
    double infill_fraction = 0.5;
    std::string decoy_prefix = "xxneg";
};

struct PlantedChunk {
    std::string path;
    Polarity expected = Polarity::Neutral;
};

struct PlantedInstance {
    std::string id;
    std::string anchor;
    std::vector<PlantedChunk> chunks;
};

struct SynthCorpus {
    RepoSnapshot repo;                         // in-memory fixture repo
    std::vector<CompletionInstance> instances;
    std::vector<PlantedInstance> plant;
    std::vector<OracleScript> scripts;         // feeds the overlap oracle
};

SynthCorpus synth_corpus(const SynthConfig& cfg);

// Writes out_dir/repo/<files>, out_dir/tasks.jsonl, out_dir/plant.jsonl.
void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& out_dir);

std::vector<OracleScript> load_oracle_scripts(const std::filesystem::path& plant_file);

} // namespace repoctx
