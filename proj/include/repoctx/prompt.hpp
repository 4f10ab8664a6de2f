#pragma once

#include "repoctx/chunking.hpp"

#include <string>
#include <vector>

namespace repoctx {

// Fill-in-the-middle markers. Fine-tuned checkpoints define these as single
// tokens; the toolkit transports them as literal strings.
struct FimMarkers {
    std::string prefix = "<PREFIX>";
    std::string suffix = "<SUFFIX>";
    std::string middle = "<MIDDLE>";
};

enum class SegRole {
    PrefixMarker,
    LeftContext,
    SuffixMarker,
    RightContext,
    MC,
    ChunkBody,
    PolarityToken,
    EC,
    MiddleMarker,
    Target,
};

const char* seg_role_name(SegRole role);
bool parse_seg_role(const std::string& name, SegRole& out);

// Supervision is confined to signal tokens and the target; context segments
// carry zero loss weight.
bool seg_role_supervisable(SegRole role);
bool seg_role_is_signal(SegRole role);

struct Segment {
    SegRole role;
    std::string text;
    bool supervised = false;
    double loss_weight = 0.0;
};

Segment context_segment(SegRole role, std::string text);
Segment signal_segment(SegRole role, std::string text, double lambda);
Segment target_segment(std::string text);

// One retrieved chunk rendered as in-prompt comment lines:
//   # -----
//   # the below code fragment can be found in:
//   # <path>
//   # -----
//   # <chunk line> ...
std::string render_chunk_block(const CodeChunk& chunk);

// Leading line of the cross-file region when at least one chunk is kept.
extern const char* const kCrossFileBanner;

} // namespace repoctx
