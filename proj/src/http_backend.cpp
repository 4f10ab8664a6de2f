#include "repoctx/http_backend.hpp"
#include "repoctx/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <iostream>
#include <thread>

using nlohmann::json;

namespace repoctx {

namespace {

// Hand-rolled since std::counting_semaphore needs a compile-time max.
class InFlightGate {
public:
    explicit InFlightGate(int limit) : slots_(limit > 0 ? limit : 1) {}

    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard lk(mu_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int slots_;
};

struct GateGuard {
    InFlightGate& gate;
    explicit GateGuard(InFlightGate& g) : gate(g) { gate.acquire(); }
    ~GateGuard() { gate.release(); }
};

std::string redact(const json& body) {
    json copy = body;
    if (copy.contains("api_key")) copy["api_key"] = "***";
    return copy.dump();
}

} // namespace

struct HttpBackend::Impl {
    httplib::Client client;
    InFlightGate gate;

    Impl(const HttpBackendConfig& cfg) : client(cfg.base_url), gate(cfg.max_in_flight) {
        auto secs = static_cast<time_t>(cfg.timeout_seconds);
        auto usecs = static_cast<time_t>((cfg.timeout_seconds - secs) * 1e6);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        client.set_connection_timeout(secs, usecs);
        if (!cfg.api_key.empty()) {
            client.set_default_headers({{"Authorization", "Bearer " + cfg.api_key}});
        }
    }
};

HttpBackend::HttpBackend(HttpBackendConfig cfg, std::function<void(const std::string&)> warn)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>(cfg_)), warn_(std::move(warn)) {}

HttpBackend::~HttpBackend() = default;

void HttpBackend::warn(const std::string& message) {
    if (warn_) warn_(message);
    else std::cerr << "[repoctx] warning: " << message << "\n";
}

namespace {

// Retries connection errors and 5xx with exponential backoff; 4xx fails fast.
json post_with_retries(httplib::Client& client, const std::string& path, const json& body,
                       int max_retries, bool debug, ErrCode on_exhaustion,
                       const std::string& what) {
    std::string payload = body.dump();
    for (int attempt = 0; ; ++attempt) {
        if (debug) {
            std::cerr << "[repoctx] POST " << path << " " << redact(body) << "\n";
        }
        auto res = client.Post(path, payload, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            json parsed = json::parse(res->body, nullptr, false);
            if (!parsed.is_discarded()) return parsed;
        }
        bool retryable = !res || res->status >= 500;
        if (res && res->status >= 400 && res->status < 500) retryable = false;
        if (!retryable || attempt >= max_retries) {
            std::string detail = res ? "http status " + std::to_string(res->status)
                                     : "connection error";
            throw Error(on_exhaustion, what + " failed after " + std::to_string(attempt + 1) +
                                           " attempt(s): " + detail);
        }
        auto backoff = std::chrono::milliseconds(250ll << attempt);
        std::this_thread::sleep_for(backoff);
    }
}

} // namespace

int HttpBackend::count_tokens(const std::string& text) {
    if (!cfg_.tokenize_path.empty()) {
        GateGuard guard(impl_->gate);
        try {
            json body{{"content", text}};
            if (!cfg_.model.empty()) body["model"] = cfg_.model;
            json res = post_with_retries(impl_->client, cfg_.tokenize_path, body,
                                         cfg_.max_retries, cfg_.debug_log,
                                         ErrCode::SignalUnavailable, "tokenize");
            if (res.contains("tokens") && res["tokens"].is_array()) {
                return static_cast<int>(res["tokens"].size());
            }
            if (res.contains("count") && res["count"].is_number()) {
                return res["count"].get<int>();
            }
        } catch (const Error&) {
            // fall through to the local approximation
        }
        warn("remote token count unavailable, using local approximation");
    }
    return fallback_token_count(text);
}

SequenceLogprob HttpBackend::sequence_logprob(const LikelihoodQuery& q) {
    GateGuard guard(impl_->gate);
    json body{{cfg_.prompt_field, q.prompt + q.target},
              {cfg_.max_tokens_field, 0},
              {cfg_.echo_field, true},
              {cfg_.logprobs_field, 0},
              {cfg_.temperature_field, 0.0}};
    if (!cfg_.model.empty()) body["model"] = cfg_.model;

    json res = post_with_retries(impl_->client, cfg_.completions_path, body, cfg_.max_retries,
                                 cfg_.debug_log, ErrCode::LikelihoodUnavailable,
                                 "sequence_logprob");
    try {
        const json& lp = res.at("choices").at(0).at("logprobs");
        const json& token_logprobs = lp.at("token_logprobs");
        const json& offsets = lp.at("text_offset");
        SequenceLogprob out;
        size_t prompt_len = q.prompt.size();
        for (size_t i = 0; i < token_logprobs.size(); ++i) {
            if (token_logprobs[i].is_null()) continue;
            if (offsets[i].get<size_t>() < prompt_len) continue;   // prompt region
            double v = token_logprobs[i].get<double>();
            out.per_token.push_back(v);
            out.total += v;
        }
        if (out.per_token.empty()) {
            throw Error(ErrCode::LikelihoodUnavailable, "no target tokens in echoed logprobs");
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrCode::LikelihoodUnavailable,
                    std::string("malformed logprobs response: ") + e.what());
    }
}

SignalDistribution HttpBackend::next_token_distribution(
    const std::string& prompt, const std::vector<std::string>& candidates) {
    GateGuard guard(impl_->gate);
    json body{{cfg_.prompt_field, prompt},
              {cfg_.max_tokens_field, 1},
              {cfg_.logprobs_field, cfg_.top_logprobs},
              {cfg_.temperature_field, 0.0}};
    if (!cfg_.model.empty()) body["model"] = cfg_.model;

    json res = post_with_retries(impl_->client, cfg_.completions_path, body, cfg_.max_retries,
                                 cfg_.debug_log, ErrCode::SignalUnavailable,
                                 "next_token_distribution");
    try {
        const json& top = res.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
        // Stock models emit "<MC>" as several pieces; credit a candidate with
        // the longest returned token that prefixes it and nothing else.
        std::vector<double> scores(candidates.size(),
                                   -std::numeric_limits<double>::infinity());
        bool any = false;
        for (auto it = top.begin(); it != top.end(); ++it) {
            const std::string& piece = it.key();
            double lp = it.value().get<double>();
            int match = -1;
            size_t best_len = 0;
            int matches = 0;
            for (size_t c = 0; c < candidates.size(); ++c) {
                if (starts_with(candidates[c], piece)) {
                    ++matches;
                    if (piece.size() >= best_len) {
                        best_len = piece.size();
                        match = static_cast<int>(c);
                    }
                }
            }
            if (matches == 1 || (matches >= 1 && piece == candidates[static_cast<size_t>(match)])) {
                auto& slot = scores[static_cast<size_t>(match)];
                slot = std::max(slot, lp);
                any = true;
            }
        }
        if (!any) {
            throw Error(ErrCode::SignalUnavailable,
                        "no candidate token present in top logprobs");
        }
        double floor = -1e9;
        for (auto& s : scores) {
            if (!std::isfinite(s)) s = floor;
        }
        return softmax_distribution(candidates, scores);
    } catch (const json::exception& e) {
        throw Error(ErrCode::SignalUnavailable,
                    std::string("malformed top_logprobs response: ") + e.what());
    }
}

std::string HttpBackend::complete(const std::string& prompt, int max_tokens,
                                  const std::vector<std::string>& stop) {
    GateGuard guard(impl_->gate);
    json body{{cfg_.prompt_field, prompt},
              {cfg_.max_tokens_field, max_tokens},
              {cfg_.temperature_field, 0.0}};
    if (!stop.empty()) body[cfg_.stop_field] = stop;
    if (!cfg_.model.empty()) body["model"] = cfg_.model;

    json res = post_with_retries(impl_->client, cfg_.completions_path, body, cfg_.max_retries,
                                 cfg_.debug_log, ErrCode::CompletionUnavailable, "complete");
    try {
        std::string text = res.at("choices").at(0).at("text").get<std::string>();
        return apply_stop_and_limit(std::move(text), stop, max_tokens);
    } catch (const json::exception& e) {
        throw Error(ErrCode::CompletionUnavailable,
                    std::string("malformed completion response: ") + e.what());
    }
}

} // namespace repoctx
