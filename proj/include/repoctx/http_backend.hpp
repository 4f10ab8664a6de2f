#pragma once

#include "repoctx/backend.hpp"

#include <functional>
#include <memory>
#include <string>

namespace repoctx {

// Completions-style HTTP protocol: echo+logprobs for sequence likelihoods,
// top-logprobs for restricted next-token distributions. Paths and body field
// names are configuration because providers disagree on all of them.
struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string completions_path = "/v1/completions";
    std::string tokenize_path = "/tokenize";   // empty disables the remote count
    std::string model;
    std::string api_key;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int max_in_flight = 8;
    int top_logprobs = 20;
    bool debug_log = false;

    std::string prompt_field = "prompt";
    std::string max_tokens_field = "max_tokens";
    std::string stop_field = "stop";
    std::string logprobs_field = "logprobs";
    std::string echo_field = "echo";
    std::string temperature_field = "temperature";
};

class HttpBackend final : public GeneratorBackend {
public:
    explicit HttpBackend(HttpBackendConfig cfg,
                         std::function<void(const std::string&)> warn = nullptr);
    ~HttpBackend() override;

    std::string name() const override { return "http:" + cfg_.base_url; }
    int count_tokens(const std::string& text) override;
    SequenceLogprob sequence_logprob(const LikelihoodQuery& q) override;
    SignalDistribution next_token_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override;
    std::string complete(const std::string& prompt, int max_tokens,
                         const std::vector<std::string>& stop) override;

private:
    struct Impl;
    HttpBackendConfig cfg_;
    std::unique_ptr<Impl> impl_;
    std::function<void(const std::string&)> warn_;

    void warn(const std::string& message);
};

} // namespace repoctx
