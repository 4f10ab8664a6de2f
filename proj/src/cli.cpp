#include "repoctx/cli.hpp"

#include "repoctx/backend.hpp"
#include "repoctx/chunking.hpp"
#include "repoctx/corpus.hpp"
#include "repoctx/dataset.hpp"
#include "repoctx/engine.hpp"
#include "repoctx/errors.hpp"
#include "repoctx/eval.hpp"
#include "repoctx/http_backend.hpp"
#include "repoctx/labeler.hpp"
#include "repoctx/synth.hpp"
#include "repoctx/text.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace repoctx {

namespace {

struct ToolConfig {
    std::string repo_root;
    std::string task_file;
    std::string out;
    std::string out_dir = "prompts";
    std::string report = "eval_rows.jsonl";
    std::string trace_file;
    std::string exclude;
    std::vector<std::string> extensions = {".py"};

    ChunkerConfig chunker;
    LabelerConfig labeler;
    EngineConfig engine;
    double lambda = 2.0;
    double sufficiency_threshold = 0.5;

    std::string backend_spec;
    std::string oracle_script;
    std::string record_file;
    std::string api_key_env = "REPOCTX_API_KEY";
    std::string model;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int max_in_flight = 8;

    uint64_t seed = 1;
    int per_repo = 10;
    std::string formats = "both";
    int instances = 10;
    std::string plant = "pos:1,neg:1,neu:8";
    std::string strategy = "filter";
    bool compare = false;
    std::string prompt_dir;

    int workers = 0;
    bool debug = false;
    bool show_config = false;
    bool complete_requires_target = false;
};

void emit_error_record(const Error& e) {
    json j{{"error", err_code_name(e.code())}, {"message", e.what()}};
    if (!e.instance_id().empty()) j["instance"] = e.instance_id();
    std::cerr << j.dump() << "\n";
}

void emit_warning(const std::string& message) {
    std::cerr << json{{"warning", message}}.dump() << "\n";
}

std::shared_ptr<GeneratorBackend> make_backend(const ToolConfig& cfg) {
    if (cfg.backend_spec.empty()) {
        throw Error(ErrCode::UsageError, "--backend is required for this subcommand");
    }
    std::shared_ptr<GeneratorBackend> backend;
    if (cfg.backend_spec == "mock:overlap") {
        auto oracle = std::make_shared<OverlapOracleBackend>(OverlapOracleConfig{},
                                                             cfg.engine.signal);
        if (!cfg.oracle_script.empty()) {
            for (auto& s : load_oracle_scripts(cfg.oracle_script)) {
                oracle->add_script(std::move(s));
            }
        }
        backend = oracle;
    } else if (starts_with(cfg.backend_spec, "replay:")) {
        backend = std::make_shared<ReplayBackend>(
            ReplayBackend::from_jsonl(cfg.backend_spec.substr(7)));
    } else if (starts_with(cfg.backend_spec, "http:") ||
               starts_with(cfg.backend_spec, "https:")) {
        HttpBackendConfig hc;
        hc.base_url = cfg.backend_spec;
        hc.model = cfg.model;
        hc.timeout_seconds = cfg.timeout_seconds;
        hc.max_retries = cfg.max_retries;
        hc.max_in_flight = cfg.max_in_flight;
        hc.debug_log = cfg.debug;
        if (const char* key = std::getenv(cfg.api_key_env.c_str())) hc.api_key = key;
        backend = std::make_shared<HttpBackend>(std::move(hc), emit_warning);
    } else {
        throw Error(ErrCode::UsageError,
                    "unknown backend '" + cfg.backend_spec +
                        "' (want mock:overlap, replay:FILE, or http(s)://...)");
    }
    if (!cfg.record_file.empty()) {
        backend = std::make_shared<RecordingBackend>(backend);
    }
    return backend;
}

void finish_recording(const ToolConfig& cfg, const std::shared_ptr<GeneratorBackend>& backend) {
    if (cfg.record_file.empty()) return;
    if (auto* rec = dynamic_cast<RecordingBackend*>(backend.get())) {
        rec->dump_jsonl(cfg.record_file);
    }
}

RepoSnapshot load_repo_checked(const ToolConfig& cfg) {
    if (cfg.repo_root.empty()) {
        throw Error(ErrCode::UsageError, "--repo-root is required for this subcommand");
    }
    RepoSnapshot repo = load_repo(cfg.repo_root, cfg.extensions);
    for (const auto& w : repo.warnings) emit_warning(w);
    return repo;
}

InstanceLoadResult load_instances_checked(const ToolConfig& cfg, bool require_target) {
    if (cfg.task_file.empty()) {
        throw Error(ErrCode::UsageError, "--task-file is required for this subcommand");
    }
    InstanceLoadResult loaded = load_instances(cfg.task_file, require_target);
    for (const auto& e : loaded.errors) emit_warning(e);
    return loaded;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrCode::IoError, "cannot write " + path);
    return out;
}

PlantSpec parse_plant(const std::string& spec) {
    PlantSpec plant{0, 0, 0};
    size_t start = 0;
    while (start < spec.size()) {
        size_t comma = spec.find(',', start);
        std::string item = strip(spec.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw Error(ErrCode::UsageError, "bad --plant entry '" + item + "'");
        }
        std::string key = strip(item.substr(0, colon));
        int value = std::atoi(item.substr(colon + 1).c_str());
        if (key == "pos") plant.helpful = value;
        else if (key == "neg") plant.misleading = value;
        else if (key == "neu") plant.irrelevant = value;
        else throw Error(ErrCode::UsageError, "bad --plant key '" + key + "'");
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return plant;
}

void print_config(const ToolConfig& cfg) {
    std::cout << "repo_root=" << cfg.repo_root << "\n"
              << "task_file=" << cfg.task_file << "\n"
              << "window=" << cfg.chunker.window << "\n"
              << "stride=" << cfg.chunker.stride << "\n"
              << "top_k=" << cfg.engine.top_k << "\n"
              << "query_window=" << cfg.engine.query_window << "\n"
              << "tc=" << cfg.engine.t_c << "\n"
              << "tp=" << cfg.engine.t_p << "\n"
              << "tn=" << cfg.engine.t_n << "\n"
              << "max_prompt_tokens=" << cfg.engine.max_prompt_tokens << "\n"
              << "in_file_budget=" << cfg.engine.in_file_budget << "\n"
              << "cross_file_budget=" << cfg.engine.cross_file_budget << "\n"
              << "label_tp=" << cfg.labeler.t_pos << "\n"
              << "label_tn=" << cfg.labeler.t_neg << "\n"
              << "lambda=" << cfg.lambda << "\n"
              << "seed=" << cfg.seed << "\n"
              << "backend=" << cfg.backend_spec << "\n"
              << "workers=" << cfg.workers << "\n";
}

void apply_workers(const ToolConfig& cfg) {
#ifdef _OPENMP
    if (cfg.workers > 0) {
        omp_set_num_threads(std::min(cfg.workers, std::max(1, cfg.max_in_flight)));
    }
#else
    (void)cfg;
#endif
}

// --- subcommand bodies -------------------------------------------------------

int cmd_index(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    CrossFileIndex index = build_index(repo, cfg.exclude, cfg.chunker);
    std::string out_path = cfg.out.empty() ? "index.jsonl" : cfg.out;
    auto out = open_out(out_path);
    index.dump_jsonl(out);
    std::cout << "indexed " << index.size() << " chunk(s) from " << repo.files.size()
              << " file(s) -> " << out_path << "\n";
    return 0;
}

int cmd_retrieve(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    auto loaded = load_instances_checked(cfg, false);
    std::string out_path = cfg.out.empty() ? "retrieval.jsonl" : cfg.out;
    auto out = open_out(out_path);
    for (const auto& inst : loaded.instances) {
        CrossFileIndex index = build_index(repo, inst.target_path, cfg.chunker);
        RetrievalResult result =
            retrieve(index, inst.prefix_lines, cfg.engine.top_k, cfg.engine.query_window);
        for (size_t r = 0; r < result.ranked.size(); ++r) {
            const auto& sc = result.ranked[r];
            out << json{{"id", inst.id},
                        {"rank", r + 1},
                        {"path", sc.chunk.path},
                        {"start_line", sc.chunk.start_line},
                        {"end_line", sc.chunk.end_line},
                        {"score", sc.score}}
                       .dump()
                << "\n";
        }
    }
    std::cout << "retrieval written to " << out_path << "\n";
    return 0;
}

int cmd_label(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    auto loaded = load_instances_checked(cfg, true);
    auto backend = make_backend(cfg);

    std::string out_path = cfg.out.empty() ? "labels.jsonl" : cfg.out;
    auto out = open_out(out_path);
    std::vector<InstanceLabels> corpus;
    for (const auto& inst : loaded.instances) {
        CrossFileIndex index = build_index(repo, inst.target_path, cfg.chunker);
        RetrievalResult retrieved =
            retrieve(index, inst.prefix_lines, cfg.engine.top_k, cfg.engine.query_window);
        LabelRun run = label_chunks(inst, retrieved.ranked, *backend, cfg.labeler, cfg.engine);
        for (const auto& r : run.report) emit_warning(r);
        write_label_dump(out, inst.id, run.labeled);
        corpus.push_back({inst.id, std::move(run.labeled)});
    }
    std::cout << polarity_distribution(corpus).to_table();
    std::cout << "labels written to " << out_path << "\n";
    finish_recording(cfg, backend);
    return 0;
}

int cmd_build_dataset(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    auto backend = make_backend(cfg);

    std::vector<CompletionInstance> instances;
    if (!cfg.task_file.empty()) {
        instances = load_instances_checked(cfg, true).instances;
    } else {
        SamplingConfig sampling;
        sampling.targets_per_repo = cfg.per_repo;
        sampling.rng_seed = cfg.seed;
        SampleResult sampled = sample_targets(repo, sampling);
        for (const auto& r : sampled.report) emit_warning(r);
        instances = std::move(sampled.instances);
    }

    bool want_all = cfg.formats == "both" || cfg.formats == "all_candidates";
    bool want_positive = cfg.formats == "both" || cfg.formats == "positive_only";
    if (!want_all && !want_positive) {
        throw Error(ErrCode::UsageError,
                    "--formats must be all_candidates, positive_only, or both");
    }

    VerbalizeSpec vspec;
    vspec.fim = cfg.engine.fim;
    vspec.signal = cfg.engine.signal;
    vspec.lambda = cfg.lambda;
    Rng rng(cfg.seed);

    std::vector<TrainingRecord> records;
    int skipped_insufficient = 0, skipped_format = 0;
    for (const auto& inst : instances) {
        CrossFileIndex index = build_index(repo, inst.target_path, cfg.chunker);
        RetrievalResult retrieved =
            retrieve(index, inst.prefix_lines, cfg.engine.top_k, cfg.engine.query_window);
        LabelRun run = label_chunks(inst, retrieved.ranked, *backend, cfg.labeler, cfg.engine);
        for (const auto& r : run.report) emit_warning(r);
        if (!sufficiency_filter(inst, run.labeled, cfg.sufficiency_threshold)) {
            ++skipped_insufficient;
            continue;
        }
        if (want_all) {
            try {
                records.push_back(verbalize(inst, run.labeled, RecordFormat::AllCandidates,
                                            vspec, rng));
            } catch (const Error& e) {
                if (e.code() != ErrCode::FormatInapplicable) throw;
                ++skipped_format;
            }
        }
        if (want_positive) {
            records.push_back(verbalize(inst, run.labeled, RecordFormat::PositiveOnly, vspec,
                                        rng));
        }
    }

    std::string out_path = cfg.out.empty() ? "dataset.jsonl" : cfg.out;
    auto out = open_out(out_path);
    export_records(records, out);
    std::cout << "dataset: " << records.size() << " record(s) from " << instances.size()
              << " instance(s) (" << skipped_insufficient << " below sufficiency, "
              << skipped_format << " format-inapplicable) -> " << out_path << "\n";
    finish_recording(cfg, backend);
    return 0;
}

int cmd_complete(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    auto loaded = load_instances_checked(cfg, cfg.complete_requires_target);
    auto backend = make_backend(cfg);

    struct Outcome {
        bool ok = false;
        CompletionResult result;
        std::string error;
    };
    std::vector<Outcome> outcomes(loaded.instances.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < static_cast<long>(loaded.instances.size()); ++i) {
        auto idx = static_cast<size_t>(i);
        const auto& inst = loaded.instances[idx];
        try {
            CrossFileIndex index = build_index(repo, inst.target_path, cfg.chunker);
            outcomes[idx].result = run(inst, index, *backend, cfg.engine);
            outcomes[idx].ok = true;
        } catch (const std::exception& e) {
            outcomes[idx].error = e.what();
        }
    }

    std::string out_path = cfg.out.empty() ? "completions.jsonl" : cfg.out;
    auto out = open_out(out_path);
    std::unique_ptr<std::ofstream> trace_out;
    if (!cfg.trace_file.empty()) {
        trace_out = std::make_unique<std::ofstream>(cfg.trace_file, std::ios::binary);
    }
    int ok = 0;
    for (size_t i = 0; i < outcomes.size(); ++i) {
        const auto& inst = loaded.instances[i];
        if (!outcomes[i].ok) {
            emit_warning(inst.id + " failed: " + outcomes[i].error);
            continue;
        }
        ++ok;
        const auto& res = outcomes[i].result;
        out << json{{"id", res.instance_id},
                    {"generated", res.generated},
                    {"stopped_reason", stop_reason_name(res.trace.stopped_reason)},
                    {"kept_chunks", res.trace.kept_chunks.size()},
                    {"signal_tokens", res.trace.decisions.size()},
                    {"prompt_tokens", res.prompt.token_counts.total},
                    {"cross_file_tokens", res.prompt.token_counts.cross_file}}
                   .dump()
            << "\n";
        if (trace_out) {
            *trace_out << "=== " << res.instance_id << "\n" << res.trace.to_log();
        }
    }
    std::cout << "completed " << ok << "/" << outcomes.size() << " instance(s) -> " << out_path
              << "\n";
    finish_recording(cfg, backend);
    return ok > 0 ? 0 : 1;
}

int cmd_filter_prompt(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    auto loaded = load_instances_checked(cfg, false);
    auto backend = make_backend(cfg);

    fs::create_directories(cfg.out_dir);
    auto manifest = open_out(cfg.out_dir + "/manifest.jsonl");
    for (const auto& inst : loaded.instances) {
        CrossFileIndex index = build_index(repo, inst.target_path, cfg.chunker);
        FilteredPrompt fp = export_filtered_prompt(inst, index, *backend, cfg.engine);
        std::string file = inst.id + ".txt";
        auto out = open_out(cfg.out_dir + "/" + file);
        out << fp.prompt.text();
        manifest << json{{"id", inst.id},
                         {"file", file},
                         {"in_file_tokens", fp.prompt.token_counts.in_file},
                         {"cross_file_tokens", fp.prompt.token_counts.cross_file},
                         {"total_tokens", fp.prompt.token_counts.total},
                         {"kept_chunks", fp.trace.kept_chunks.size()}}
                        .dump()
                 << "\n";
    }
    std::cout << "filtered prompts for " << loaded.instances.size() << " instance(s) -> "
              << cfg.out_dir << "\n";
    finish_recording(cfg, backend);
    return 0;
}

int cmd_evaluate(const ToolConfig& cfg) {
    RepoSnapshot repo = load_repo_checked(cfg);
    auto loaded = load_instances_checked(cfg, true);
    auto backend = make_backend(cfg);

    std::vector<StrategyKind> kinds;
    if (cfg.compare) {
        kinds = {StrategyKind::NoRetrieve, StrategyKind::FullRetrieve, StrategyKind::Filtered};
    } else if (cfg.strategy == "none") {
        kinds = {StrategyKind::NoRetrieve};
    } else if (cfg.strategy == "full") {
        kinds = {StrategyKind::FullRetrieve};
    } else if (cfg.strategy == "filter") {
        kinds = {StrategyKind::Filtered};
    } else if (cfg.strategy == "replay") {
        kinds = {StrategyKind::ExternalPromptReplay};
    } else {
        throw Error(ErrCode::UsageError,
                    "--strategy must be none, full, filter, or replay");
    }

    auto rows_out = open_out(cfg.report);
    std::vector<EvalReport> reports;
    for (StrategyKind kind : kinds) {
        StrategySpec spec;
        spec.kind = kind;
        spec.engine = cfg.engine;
        spec.chunker = cfg.chunker;
        spec.prompt_dir = cfg.prompt_dir;
        EvalReport report = run_strategy(loaded.instances, repo, *backend, spec);
        rows_out << report.to_jsonl();
        std::cout << report.summary_line() << "\n";
        reports.push_back(std::move(report));
    }
    if (reports.size() > 1) {
        std::cout << length_report(reports).to_table();
    }
    std::cout << "rows written to " << cfg.report << "\n";
    finish_recording(cfg, backend);
    return 0;
}

int cmd_synth_corpus(const ToolConfig& cfg) {
    SynthConfig synth;
    synth.seed = cfg.seed;
    synth.n_instances = cfg.instances;
    synth.plant = parse_plant(cfg.plant);
    SynthCorpus corpus = synth_corpus(synth);
    std::string out_dir = cfg.out_dir == "prompts" ? "synth" : cfg.out_dir;
    write_synth_corpus(corpus, out_dir);
    std::cout << "synthesized " << corpus.instances.size() << " instance(s), "
              << corpus.repo.files.size() << " file(s) -> " << out_dir << "\n";
    return 0;
}

void add_common_flags(CLI::App* sub, ToolConfig& cfg) {
    sub->add_option("--repo-root", cfg.repo_root, "Repository snapshot root")
        ->envname("REPOCTX_REPO_ROOT");
    sub->add_option("--extensions", cfg.extensions, "Source file extensions")
        ->capture_default_str();
    sub->add_option("--workers", cfg.workers, "Worker pool size (0 = all processors)")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
    sub->add_flag("--debug", cfg.debug, "Log request/response bodies");
    sub->add_flag("--show-config", cfg.show_config, "Print the resolved configuration");
    sub->set_config("--config", "", "Flat key=value configuration file");
}

void add_chunker_flags(CLI::App* sub, ToolConfig& cfg) {
    sub->add_option("--window", cfg.chunker.window, "Chunk window height in lines")
        ->capture_default_str();
    sub->add_option("--stride", cfg.chunker.stride, "Chunk stride in lines")
        ->capture_default_str();
    sub->add_option("--top-k", cfg.engine.top_k, "Retrieved chunks per query")
        ->capture_default_str();
    sub->add_option("--query-window", cfg.engine.query_window,
                    "Prefix lines forming the retrieval query")
        ->capture_default_str();
}

void add_backend_flags(CLI::App* sub, ToolConfig& cfg) {
    sub->add_option("--backend", cfg.backend_spec,
                    "mock:overlap | replay:FILE | http(s)://host:port")
        ->envname("REPOCTX_BACKEND");
    sub->add_option("--oracle-script", cfg.oracle_script,
                    "plant.jsonl feeding the overlap oracle");
    sub->add_option("--record", cfg.record_file, "Record backend interactions to FILE");
    sub->add_option("--api-key-env", cfg.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    sub->add_option("--model", cfg.model, "Remote model name");
    sub->add_option("--timeout", cfg.timeout_seconds, "Request timeout in seconds")
        ->capture_default_str();
    sub->add_option("--retries", cfg.max_retries, "Retry budget per request")
        ->capture_default_str();
    sub->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent request cap")
        ->capture_default_str();
}

void add_engine_flags(CLI::App* sub, ToolConfig& cfg) {
    sub->add_option("--tc", cfg.engine.t_c, "P(<MC>) threshold for retrieval")
        ->capture_default_str();
    sub->add_option("--tp", cfg.engine.t_p, "P(<pos>) threshold for keeping a chunk")
        ->capture_default_str();
    sub->add_option("--tn", cfg.engine.t_n, "P(<neg>) threshold for rejecting a chunk")
        ->capture_default_str();
    sub->add_option("--max-prompt-tokens", cfg.engine.max_prompt_tokens, "Total prompt budget")
        ->capture_default_str();
    sub->add_option("--in-file-budget", cfg.engine.in_file_budget, "In-file token budget")
        ->capture_default_str();
    sub->add_option("--cross-file-budget", cfg.engine.cross_file_budget,
                    "Cross-file token budget")
        ->capture_default_str();
    sub->add_option("--max-generation-tokens", cfg.engine.max_generation_tokens,
                    "Generation cap")
        ->capture_default_str();
    sub->add_option("--stop", cfg.engine.stop_sequences, "Stop sequences");
    sub->add_flag("--keep-judged-inline", cfg.engine.keep_judged_inline,
                  "Keep rejected chunks visible, matching the worked transcript");
}

} // namespace

int dispatch(int argc, const char* const* argv) {
    ToolConfig cfg;
    CLI::App app{"retrieval-context engineering toolkit for repository-level code completion"};
    app.require_subcommand(1);

    auto* index = app.add_subcommand("index", "Chunk a repository and dump the index");
    add_common_flags(index, cfg);
    add_chunker_flags(index, cfg);
    index->add_option("--exclude", cfg.exclude, "Repo-relative path to leave out");
    index->add_option("--out", cfg.out, "Output path (default index.jsonl)");

    auto* retrieve_cmd = app.add_subcommand("retrieve", "Top-k chunks per task instance");
    add_common_flags(retrieve_cmd, cfg);
    add_chunker_flags(retrieve_cmd, cfg);
    retrieve_cmd->add_option("--task-file", cfg.task_file, "JSONL task instances")
        ->envname("REPOCTX_TASK_FILE");
    retrieve_cmd->add_option("--out", cfg.out, "Output path (default retrieval.jsonl)");

    auto* label = app.add_subcommand("label", "Score and label retrieved chunks");
    add_common_flags(label, cfg);
    add_chunker_flags(label, cfg);
    add_backend_flags(label, cfg);
    label->add_option("--task-file", cfg.task_file, "JSONL task instances (targets required)");
    label->add_option("--tp", cfg.labeler.t_pos, "Positive threshold on the contribution score")
        ->capture_default_str();
    label->add_option("--tn", cfg.labeler.t_neg, "Negative threshold on the contribution score")
        ->capture_default_str();
    label->add_option("--out", cfg.out, "Output path (default labels.jsonl)");

    auto* build = app.add_subcommand("build-dataset", "Sample, label, and verbalize records");
    add_common_flags(build, cfg);
    add_chunker_flags(build, cfg);
    add_backend_flags(build, cfg);
    build->add_option("--task-file", cfg.task_file,
                      "Optional explicit instances instead of sampling");
    build->add_option("--per-repo", cfg.per_repo, "Targets sampled per repository")
        ->capture_default_str();
    build->add_option("--formats", cfg.formats, "all_candidates | positive_only | both")
        ->capture_default_str();
    build->add_option("--lambda", cfg.lambda, "Loss weight on signal tokens")
        ->capture_default_str();
    build->add_option("--sufficiency-threshold", cfg.sufficiency_threshold,
                      "Edit-similarity bar for keeping an instance")
        ->capture_default_str();
    build->add_option("--tp", cfg.labeler.t_pos, "Positive threshold")->capture_default_str();
    build->add_option("--tn", cfg.labeler.t_neg, "Negative threshold")->capture_default_str();
    build->add_option("--out", cfg.out, "Output path (default dataset.jsonl)");

    auto* complete_cmd = app.add_subcommand("complete", "Filter-then-generate completion");
    add_common_flags(complete_cmd, cfg);
    add_chunker_flags(complete_cmd, cfg);
    add_backend_flags(complete_cmd, cfg);
    add_engine_flags(complete_cmd, cfg);
    complete_cmd->add_option("--task-file", cfg.task_file, "JSONL task instances");
    complete_cmd->add_option("--out", cfg.out, "Output path (default completions.jsonl)");
    complete_cmd->add_option("--trace", cfg.trace_file, "Write decision traces to FILE");

    auto* filter = app.add_subcommand("filter-prompt",
                                      "Export filtered prompts for an external model");
    add_common_flags(filter, cfg);
    add_chunker_flags(filter, cfg);
    add_backend_flags(filter, cfg);
    add_engine_flags(filter, cfg);
    filter->add_option("--task-file", cfg.task_file, "JSONL task instances");
    filter->add_option("--out-dir", cfg.out_dir, "Prompt output directory")
        ->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Score strategies with EM/ES");
    add_common_flags(evaluate, cfg);
    add_chunker_flags(evaluate, cfg);
    add_backend_flags(evaluate, cfg);
    add_engine_flags(evaluate, cfg);
    evaluate->add_option("--task-file", cfg.task_file, "JSONL task instances (targets required)");
    evaluate->add_option("--strategy", cfg.strategy, "none | full | filter | replay")
        ->capture_default_str();
    evaluate->add_flag("--compare", cfg.compare, "Run none, full, and filter side by side");
    evaluate->add_option("--report", cfg.report, "Row output path")->capture_default_str();
    evaluate->add_option("--prompt-dir", cfg.prompt_dir,
                         "Exported prompt directory for --strategy replay");

    auto* synth = app.add_subcommand("synth-corpus", "Generate a planted fixture corpus");
    add_common_flags(synth, cfg);
    synth->add_option("--instances", cfg.instances, "Instances to synthesize")
        ->capture_default_str();
    synth->add_option("--plant", cfg.plant, "Planted chunk counts, e.g. pos:1,neg:1,neu:8")
        ->capture_default_str();
    synth->add_option("--out-dir", cfg.out_dir, "Output directory (default synth)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        apply_workers(cfg);
        if (cfg.show_config) print_config(cfg);
        if (index->parsed()) return cmd_index(cfg);
        if (retrieve_cmd->parsed()) return cmd_retrieve(cfg);
        if (label->parsed()) return cmd_label(cfg);
        if (build->parsed()) return cmd_build_dataset(cfg);
        if (complete_cmd->parsed()) return cmd_complete(cfg);
        if (filter->parsed()) return cmd_filter_prompt(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (synth->parsed()) return cmd_synth_corpus(cfg);
        return 2;
    } catch (const Error& e) {
        emit_error_record(e);
        return e.code() == ErrCode::UsageError ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
}

} // namespace repoctx
