#pragma once

#include "repoctx/errors.hpp"

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace repoctx {

// The five signal tokens, configurable as a group. <EC>/<MC> steer adaptive
// retrieval, <pos>/<neg>/<neu> mark chunk polarity.
struct SignalTokens {
    std::string ec = "<EC>";
    std::string mc = "<MC>";
    std::string pos = "<pos>";
    std::string neg = "<neg>";
    std::string neu = "<neu>";

    std::vector<std::string> adaptive() const { return {ec, mc}; }
    std::vector<std::string> polarity() const { return {pos, neg, neu}; }
};

struct LikelihoodQuery {
    std::string prompt;
    std::string target;   // non-empty
};

struct SequenceLogprob {
    double total = 0.0;                // <= 0, nats
    std::vector<double> per_token;     // sums exactly to total
};

struct SignalDistribution {
    std::map<std::string, double> probabilities;   // keys = requested candidates

    double prob(const std::string& token) const {
        auto it = probabilities.find(token);
        return it == probabilities.end() ? 0.0 : it->second;
    }
    double sum() const;
};

// Softmax over raw (log-)scores, restricted to the candidate set.
SignalDistribution softmax_distribution(const std::vector<std::string>& candidates,
                                        const std::vector<double>& raw_scores);

// Shared generation post-processing: cut at the earliest stop sequence, then
// cap at max_tokens fallback tokens (0 yields the empty string).
std::string apply_stop_and_limit(std::string text, const std::vector<std::string>& stop,
                                 int max_tokens);

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string name() const = 0;
    virtual int count_tokens(const std::string& text) = 0;
    virtual SequenceLogprob sequence_logprob(const LikelihoodQuery& q) = 0;
    virtual SignalDistribution next_token_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) = 0;
    virtual std::string complete(const std::string& prompt, int max_tokens,
                                 const std::vector<std::string>& stop) = 0;
};

// --- request fingerprints (shared by scripted mocks and record/replay) ----

std::string fingerprint_logprob(const std::string& prompt, const std::string& target);
std::string fingerprint_distribution(const std::string& prompt,
                                     const std::vector<std::string>& candidates);
std::string fingerprint_complete(const std::string& prompt, int max_tokens,
                                 const std::vector<std::string>& stop);

// --- scripted mock -----------------------------------------------------

struct ScriptedSignal {
    std::map<std::string, double> probs;
    bool unavailable = false;
};

struct ScriptedCompletion {
    std::string text;
    bool unavailable = false;
};

// Deterministic test double. Distribution and completion responses are
// consumed FIFO (engine decisions are strictly sequential); sequence
// log-probabilities are looked up per fingerprint with a FIFO fallback.
class ScriptedBackend final : public GeneratorBackend {
public:
    std::string name() const override { return "mock:scripted"; }

    void push_signal(std::map<std::string, double> probs);
    void push_signal_unavailable();
    void push_completion(std::string text);
    void push_completion_unavailable();
    void push_logprob(double total, int token_count = 1);
    void set_logprob(const std::string& prompt, const std::string& target, double total,
                     int token_count = 1);

    int count_tokens(const std::string& text) override;
    SequenceLogprob sequence_logprob(const LikelihoodQuery& q) override;
    SignalDistribution next_token_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override;
    std::string complete(const std::string& prompt, int max_tokens,
                         const std::vector<std::string>& stop) override;

private:
    std::mutex mu_;
    std::deque<ScriptedSignal> signals_;
    std::deque<ScriptedCompletion> completions_;
    std::deque<SequenceLogprob> logprob_queue_;
    std::map<std::string, SequenceLogprob> logprob_by_fp_;
};

// --- overlap oracle -----------------------------------------------------

// Closed-form likelihood model: NLL(target | prompt) =
//   T * base_nll * (1 - gain * overlap(prompt, target)
//                     + decoy_penalty * decoy(prompt))
// where T is the target's token count (with multiplicity), overlap is the
// fraction of distinct target tokens present in the prompt, and decoy is 1
// when any prompt token carries the decoy prefix. Fully deterministic given
// (prompt, target), which makes contribution scores analytically computable.
struct OverlapOracleConfig {
    double base_nll = 2.0;        // nats per target token
    double gain = 0.5;            // helpfulness gain g
    double decoy_penalty = 0.5;   // NLL inflation from misleading content
    std::string decoy_prefix = "xxneg";
    double sufficiency = 0.5;     // overlap needed to complete correctly
};

// Per-instance knowledge for inference-time queries: the oracle recognizes
// the instance by its anchor token in the prompt.
struct OracleScript {
    std::string anchor;
    std::string target;     // ground truth (drives overlap arithmetic)
    std::string correct;    // emitted when the context is sufficient
    std::string decoyed;    // emitted when a decoy token is visible
    std::string fallback;   // emitted otherwise (default: empty)
};

class OverlapOracleBackend final : public GeneratorBackend {
public:
    explicit OverlapOracleBackend(OverlapOracleConfig cfg = {}, SignalTokens tokens = {})
        : cfg_(cfg), tokens_(tokens) {}

    void add_script(OracleScript script) { scripts_.push_back(std::move(script)); }
    const OverlapOracleConfig& config() const { return cfg_; }

    std::string name() const override { return "mock:overlap"; }
    int count_tokens(const std::string& text) override;
    SequenceLogprob sequence_logprob(const LikelihoodQuery& q) override;
    SignalDistribution next_token_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override;
    std::string complete(const std::string& prompt, int max_tokens,
                         const std::vector<std::string>& stop) override;

    static double overlap_fraction(const std::string& prompt, const std::string& target);

private:
    OverlapOracleConfig cfg_;
    SignalTokens tokens_;
    std::vector<OracleScript> scripts_;

    const OracleScript* match_script(const std::string& prompt) const;
    bool has_decoy(const std::string& text) const;
};

// --- record / replay ------------------------------------------------------

struct BackendInteraction {
    std::string op;            // count_tokens | sequence_logprob | distribution | complete
    std::string fingerprint;
    std::string response_json;
};

class RecordingBackend final : public GeneratorBackend {
public:
    explicit RecordingBackend(std::shared_ptr<GeneratorBackend> inner)
        : inner_(std::move(inner)) {}

    std::string name() const override { return "recording(" + inner_->name() + ")"; }
    int count_tokens(const std::string& text) override;
    SequenceLogprob sequence_logprob(const LikelihoodQuery& q) override;
    SignalDistribution next_token_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override;
    std::string complete(const std::string& prompt, int max_tokens,
                         const std::vector<std::string>& stop) override;

    std::vector<BackendInteraction> log() const;
    int complete_calls() const;
    void dump_jsonl(const std::string& path) const;

private:
    std::shared_ptr<GeneratorBackend> inner_;
    mutable std::mutex mu_;
    std::vector<BackendInteraction> log_;
    int complete_calls_ = 0;

    void record(std::string op, std::string fp, std::string response);
};

// Serves recorded responses by fingerprint; unknown requests throw, so a
// replay run proves the recorded interaction set is complete.
class ReplayBackend final : public GeneratorBackend {
public:
    explicit ReplayBackend(const std::vector<BackendInteraction>& log);
    static ReplayBackend from_jsonl(const std::string& path);

    std::string name() const override { return "replay"; }
    int count_tokens(const std::string& text) override;
    SequenceLogprob sequence_logprob(const LikelihoodQuery& q) override;
    SignalDistribution next_token_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override;
    std::string complete(const std::string& prompt, int max_tokens,
                         const std::vector<std::string>& stop) override;

private:
    std::map<std::string, std::string> responses_;   // fingerprint -> response json

    std::string lookup(const std::string& op, const std::string& fp) const;
};

} // namespace repoctx
