#include "repoctx/backend.hpp"
#include "repoctx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

using nlohmann::json;

namespace repoctx {

double SignalDistribution::sum() const {
    double s = 0.0;
    for (const auto& [_, p] : probabilities) s += p;
    return s;
}

SignalDistribution softmax_distribution(const std::vector<std::string>& candidates,
                                        const std::vector<double>& raw_scores) {
    SignalDistribution dist;
    if (candidates.empty() || candidates.size() != raw_scores.size()) {
        throw Error(ErrCode::SignalUnavailable, "softmax over mismatched candidate/score sizes");
    }
    double m = *std::max_element(raw_scores.begin(), raw_scores.end());
    double z = 0.0;
    std::vector<double> e(raw_scores.size());
    for (size_t i = 0; i < raw_scores.size(); ++i) {
        e[i] = std::exp(raw_scores[i] - m);
        z += e[i];
    }
    for (size_t i = 0; i < candidates.size(); ++i) {
        dist.probabilities[candidates[i]] = e[i] / z;
    }
    return dist;
}

std::string apply_stop_and_limit(std::string text, const std::vector<std::string>& stop,
                                 int max_tokens) {
    size_t cut = std::string::npos;
    for (const auto& s : stop) {
        if (s.empty()) continue;
        size_t pos = text.find(s);
        if (pos != std::string::npos) cut = std::min(cut, pos);
    }
    if (cut != std::string::npos) text.resize(cut);

    if (max_tokens <= 0) return "";
    int count = 0;
    size_t i = 0;
    auto is_word = [](unsigned char c) { return std::isalnum(c) || c == '_'; };
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (count == max_tokens) {
            text.resize(i);
            return text;
        }
        ++count;
        if (is_word(c)) {
            while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i;
        }
    }
    return text;
}

// --- fingerprints ----------------------------------------------------------

namespace {
std::string hex64(uint64_t v) {
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}
} // namespace

std::string fingerprint_logprob(const std::string& prompt, const std::string& target) {
    return "logprob|" + hex64(fnv1a64(prompt)) + "|" + hex64(fnv1a64(target));
}

std::string fingerprint_distribution(const std::string& prompt,
                                     const std::vector<std::string>& candidates) {
    std::string cand;
    for (const auto& c : candidates) {
        cand += c;
        cand += '\x1f';
    }
    return "distribution|" + hex64(fnv1a64(prompt)) + "|" + hex64(fnv1a64(cand));
}

std::string fingerprint_complete(const std::string& prompt, int max_tokens,
                                 const std::vector<std::string>& stop) {
    std::string extra = std::to_string(max_tokens);
    for (const auto& s : stop) {
        extra += '\x1f';
        extra += s;
    }
    return "complete|" + hex64(fnv1a64(prompt)) + "|" + hex64(fnv1a64(extra));
}

static std::string fingerprint_count(const std::string& text) {
    return "count|" + hex64(fnv1a64(text));
}

// --- scripted backend --------------------------------------------------

void ScriptedBackend::push_signal(std::map<std::string, double> probs) {
    std::lock_guard lk(mu_);
    signals_.push_back({std::move(probs), false});
}

void ScriptedBackend::push_signal_unavailable() {
    std::lock_guard lk(mu_);
    signals_.push_back({{}, true});
}

void ScriptedBackend::push_completion(std::string text) {
    std::lock_guard lk(mu_);
    completions_.push_back({std::move(text), false});
}

void ScriptedBackend::push_completion_unavailable() {
    std::lock_guard lk(mu_);
    completions_.push_back({"", true});
}

namespace {
SequenceLogprob make_logprob(double total, int token_count) {
    SequenceLogprob lp;
    lp.total = total;
    int n = std::max(1, token_count);
    lp.per_token.resize(static_cast<size_t>(n));
    double share = total / n;
    double acc = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        lp.per_token[static_cast<size_t>(i)] = share;
        acc += share;
    }
    lp.per_token[static_cast<size_t>(n - 1)] = total - acc;   // sums exactly
    return lp;
}
} // namespace

void ScriptedBackend::push_logprob(double total, int token_count) {
    std::lock_guard lk(mu_);
    logprob_queue_.push_back(make_logprob(total, token_count));
}

void ScriptedBackend::set_logprob(const std::string& prompt, const std::string& target,
                                  double total, int token_count) {
    std::lock_guard lk(mu_);
    logprob_by_fp_[fingerprint_logprob(prompt, target)] = make_logprob(total, token_count);
}

int ScriptedBackend::count_tokens(const std::string& text) {
    return fallback_token_count(text);
}

SequenceLogprob ScriptedBackend::sequence_logprob(const LikelihoodQuery& q) {
    std::lock_guard lk(mu_);
    auto it = logprob_by_fp_.find(fingerprint_logprob(q.prompt, q.target));
    if (it != logprob_by_fp_.end()) return it->second;
    if (!logprob_queue_.empty()) {
        auto lp = logprob_queue_.front();
        logprob_queue_.pop_front();
        return lp;
    }
    throw Error(ErrCode::LikelihoodUnavailable, "scripted backend has no log-probability left");
}

SignalDistribution ScriptedBackend::next_token_distribution(
    const std::string&, const std::vector<std::string>& candidates) {
    std::lock_guard lk(mu_);
    if (signals_.empty()) {
        throw Error(ErrCode::SignalUnavailable, "scripted backend has no signal response left");
    }
    ScriptedSignal s = std::move(signals_.front());
    signals_.pop_front();
    if (s.unavailable) {
        throw Error(ErrCode::SignalUnavailable, "scripted signal unavailability");
    }
    SignalDistribution dist;
    for (const auto& c : candidates) {
        auto it = s.probs.find(c);
        if (it == s.probs.end()) {
            throw Error(ErrCode::SignalUnavailable,
                        "scripted distribution lacks candidate " + c);
        }
        dist.probabilities[c] = it->second;
    }
    return dist;
}

std::string ScriptedBackend::complete(const std::string&, int max_tokens,
                                      const std::vector<std::string>& stop) {
    std::lock_guard lk(mu_);
    if (completions_.empty()) {
        throw Error(ErrCode::CompletionUnavailable, "scripted backend has no completion left");
    }
    ScriptedCompletion c = std::move(completions_.front());
    completions_.pop_front();
    if (c.unavailable) {
        throw Error(ErrCode::CompletionUnavailable, "scripted completion unavailability");
    }
    return apply_stop_and_limit(std::move(c.text), stop, max_tokens);
}

// --- overlap oracle -------------------------------------------------------

double OverlapOracleBackend::overlap_fraction(const std::string& prompt,
                                              const std::string& target) {
    auto target_tokens = tokenize_set(target);
    if (target_tokens.empty()) return 0.0;
    auto prompt_tokens = tokenize_set(prompt);
    size_t i = 0, j = 0, common = 0;
    while (i < prompt_tokens.size() && j < target_tokens.size()) {
        int cmp = prompt_tokens[i].compare(target_tokens[j]);
        if (cmp == 0) { ++common; ++i; ++j; }
        else if (cmp < 0) ++i;
        else ++j;
    }
    return static_cast<double>(common) / static_cast<double>(target_tokens.size());
}

bool OverlapOracleBackend::has_decoy(const std::string& text) const {
    for (const auto& tok : tokenize_all(text)) {
        if (starts_with(tok, cfg_.decoy_prefix)) return true;
    }
    return false;
}

const OracleScript* OverlapOracleBackend::match_script(const std::string& prompt) const {
    // Rightmost anchor wins: assembled prompts place the instance's own
    // in-file context after any cross-file material.
    const OracleScript* best = nullptr;
    size_t best_pos = 0;
    for (const auto& s : scripts_) {
        if (s.anchor.empty()) continue;
        size_t pos = prompt.rfind(s.anchor);
        if (pos == std::string::npos) continue;
        if (!best || pos >= best_pos) {
            best = &s;
            best_pos = pos;
        }
    }
    return best;
}

int OverlapOracleBackend::count_tokens(const std::string& text) {
    return fallback_token_count(text);
}

SequenceLogprob OverlapOracleBackend::sequence_logprob(const LikelihoodQuery& q) {
    if (q.target.empty()) {
        throw Error(ErrCode::LikelihoodUnavailable, "empty target");
    }
    int t = std::max<int>(1, static_cast<int>(tokenize_all(q.target).size()));
    double ov = overlap_fraction(q.prompt, q.target);
    double decoy = has_decoy(q.prompt) ? 1.0 : 0.0;
    double nll = t * cfg_.base_nll * (1.0 - cfg_.gain * ov + cfg_.decoy_penalty * decoy);
    return make_logprob(-nll, t);
}

SignalDistribution OverlapOracleBackend::next_token_distribution(
    const std::string& prompt, const std::vector<std::string>& candidates) {
    bool adaptive = std::find(candidates.begin(), candidates.end(), tokens_.mc) != candidates.end();
    bool polarity = std::find(candidates.begin(), candidates.end(), tokens_.pos) != candidates.end();
    const OracleScript* script = match_script(prompt);

    std::map<std::string, double> mass;
    if (adaptive && !polarity) {
        double p_ec = 0.0;
        if (script) p_ec = std::clamp(overlap_fraction(prompt, script->target), 0.0, 1.0);
        mass[tokens_.ec] = p_ec;
        mass[tokens_.mc] = 1.0 - p_ec;
    } else if (polarity) {
        double p_pos = 0.0, p_neg = 0.0;
        size_t mark = prompt.rfind(tokens_.mc);
        if (script && mark != std::string::npos) {
            std::string chunk_text = prompt.substr(mark + tokens_.mc.size());
            p_pos = std::clamp(cfg_.gain * overlap_fraction(chunk_text, script->target), 0.0, 1.0);
            if (has_decoy(chunk_text)) {
                p_neg = std::min(cfg_.decoy_penalty, 1.0 - p_pos);
            }
        }
        mass[tokens_.pos] = p_pos;
        mass[tokens_.neg] = p_neg;
        mass[tokens_.neu] = 1.0 - p_pos - p_neg;
    }

    SignalDistribution dist;
    double total = 0.0;
    for (const auto& c : candidates) {
        auto it = mass.find(c);
        double p = it == mass.end() ? 0.0 : it->second;
        dist.probabilities[c] = p;
        total += p;
    }
    if (total <= 0.0) {
        double u = 1.0 / static_cast<double>(candidates.size());
        for (const auto& c : candidates) dist.probabilities[c] = u;
    } else if (std::abs(total - 1.0) > 1e-12) {
        for (auto& [_, p] : dist.probabilities) p /= total;
    }
    return dist;
}

std::string OverlapOracleBackend::complete(const std::string& prompt, int max_tokens,
                                           const std::vector<std::string>& stop) {
    const OracleScript* script = match_script(prompt);
    std::string text;
    if (script) {
        if (has_decoy(prompt)) {
            text = script->decoyed;
        } else if (overlap_fraction(prompt, script->target) >= cfg_.sufficiency) {
            text = script->correct;
        } else {
            text = script->fallback;
        }
    }
    return apply_stop_and_limit(std::move(text), stop, max_tokens);
}

// --- record / replay --------------------------------------------------------

void RecordingBackend::record(std::string op, std::string fp, std::string response) {
    std::lock_guard lk(mu_);
    log_.push_back({std::move(op), std::move(fp), std::move(response)});
}

int RecordingBackend::count_tokens(const std::string& text) {
    int n = inner_->count_tokens(text);
    record("count_tokens", fingerprint_count(text), json{{"n", n}}.dump());
    return n;
}

SequenceLogprob RecordingBackend::sequence_logprob(const LikelihoodQuery& q) {
    auto lp = inner_->sequence_logprob(q);
    record("sequence_logprob", fingerprint_logprob(q.prompt, q.target),
           json{{"total", lp.total}, {"per_token", lp.per_token}}.dump());
    return lp;
}

SignalDistribution RecordingBackend::next_token_distribution(
    const std::string& prompt, const std::vector<std::string>& candidates) {
    auto dist = inner_->next_token_distribution(prompt, candidates);
    record("distribution", fingerprint_distribution(prompt, candidates),
           json{{"probs", dist.probabilities}}.dump());
    return dist;
}

std::string RecordingBackend::complete(const std::string& prompt, int max_tokens,
                                       const std::vector<std::string>& stop) {
    std::string text = inner_->complete(prompt, max_tokens, stop);
    {
        std::lock_guard lk(mu_);
        ++complete_calls_;
    }
    record("complete", fingerprint_complete(prompt, max_tokens, stop),
           json{{"text", text}}.dump());
    return text;
}

std::vector<BackendInteraction> RecordingBackend::log() const {
    std::lock_guard lk(mu_);
    return log_;
}

int RecordingBackend::complete_calls() const {
    std::lock_guard lk(mu_);
    return complete_calls_;
}

void RecordingBackend::dump_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrCode::IoError, "cannot write recording: " + path);
    std::lock_guard lk(mu_);
    for (const auto& e : log_) {
        out << json{{"op", e.op}, {"fp", e.fingerprint}, {"response", e.response_json}}.dump()
            << "\n";
    }
}

ReplayBackend::ReplayBackend(const std::vector<BackendInteraction>& log) {
    for (const auto& e : log) responses_[e.fingerprint] = e.response_json;
}

ReplayBackend ReplayBackend::from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrCode::IoError, "cannot read recording: " + path);
    std::vector<BackendInteraction> log;
    std::string line;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        json j = json::parse(line);
        log.push_back({j.at("op"), j.at("fp"), j.at("response")});
    }
    return ReplayBackend(log);
}

std::string ReplayBackend::lookup(const std::string& op, const std::string& fp) const {
    auto it = responses_.find(fp);
    if (it == responses_.end()) {
        throw Error(ErrCode::SignalUnavailable, "replay has no recording for " + op + " " + fp);
    }
    return it->second;
}

int ReplayBackend::count_tokens(const std::string& text) {
    return json::parse(lookup("count_tokens", fingerprint_count(text))).at("n").get<int>();
}

SequenceLogprob ReplayBackend::sequence_logprob(const LikelihoodQuery& q) {
    json j = json::parse(lookup("sequence_logprob", fingerprint_logprob(q.prompt, q.target)));
    SequenceLogprob lp;
    lp.total = j.at("total").get<double>();
    lp.per_token = j.at("per_token").get<std::vector<double>>();
    return lp;
}

SignalDistribution ReplayBackend::next_token_distribution(
    const std::string& prompt, const std::vector<std::string>& candidates) {
    json j = json::parse(lookup("distribution", fingerprint_distribution(prompt, candidates)));
    SignalDistribution dist;
    dist.probabilities = j.at("probs").get<std::map<std::string, double>>();
    return dist;
}

std::string ReplayBackend::complete(const std::string& prompt, int max_tokens,
                                    const std::vector<std::string>& stop) {
    json j = json::parse(lookup("complete", fingerprint_complete(prompt, max_tokens, stop)));
    return j.at("text").get<std::string>();
}

} // namespace repoctx
