#pragma once

#include <stdexcept>
#include <string>

namespace repoctx {

enum class ErrCode {
    UsageError,          // bad invocation, bad config
    IoError,             // unreadable root, write failure
    NoValidInstances,    // task file yielded zero usable records
    LikelihoodUnavailable,
    SignalUnavailable,
    CompletionUnavailable,
    DegenerateTarget,    // baseline NLL ~ 0, score undefined
    PromptOverflow,      // in-file context cannot fit the budget
    FormatInapplicable,  // verbalization preconditions not met
    MismatchedReports,   // length_report over different instance sets
};

const char* err_code_name(ErrCode code);

class Error : public std::runtime_error {
public:
    Error(ErrCode code, std::string message, std::string instance_id = "")
        : std::runtime_error(message), code_(code), instance_id_(std::move(instance_id)) {}

    ErrCode code() const { return code_; }
    const std::string& instance_id() const { return instance_id_; }

private:
    ErrCode code_;
    std::string instance_id_;
};

} // namespace repoctx
