#include "repoctx/prompt.hpp"

namespace repoctx {

const char* const kCrossFileBanner =
    "# Here are relevant code fragments from other files of the repo:";

const char* seg_role_name(SegRole role) {
    switch (role) {
        case SegRole::PrefixMarker: return "prefix_marker";
        case SegRole::LeftContext: return "left_context";
        case SegRole::SuffixMarker: return "suffix_marker";
        case SegRole::RightContext: return "right_context";
        case SegRole::MC: return "mc";
        case SegRole::ChunkBody: return "chunk_body";
        case SegRole::PolarityToken: return "polarity_token";
        case SegRole::EC: return "ec";
        case SegRole::MiddleMarker: return "middle_marker";
        case SegRole::Target: return "target";
    }
    return "unknown";
}

bool parse_seg_role(const std::string& name, SegRole& out) {
    static const std::pair<const char*, SegRole> table[] = {
        {"prefix_marker", SegRole::PrefixMarker}, {"left_context", SegRole::LeftContext},
        {"suffix_marker", SegRole::SuffixMarker}, {"right_context", SegRole::RightContext},
        {"mc", SegRole::MC},                      {"chunk_body", SegRole::ChunkBody},
        {"polarity_token", SegRole::PolarityToken}, {"ec", SegRole::EC},
        {"middle_marker", SegRole::MiddleMarker}, {"target", SegRole::Target},
    };
    for (const auto& [n, r] : table) {
        if (name == n) {
            out = r;
            return true;
        }
    }
    return false;
}

bool seg_role_is_signal(SegRole role) {
    return role == SegRole::MC || role == SegRole::PolarityToken || role == SegRole::EC;
}

bool seg_role_supervisable(SegRole role) {
    return seg_role_is_signal(role) || role == SegRole::Target;
}

Segment context_segment(SegRole role, std::string text) {
    return Segment{role, std::move(text), false, 0.0};
}

Segment signal_segment(SegRole role, std::string text, double lambda) {
    return Segment{role, std::move(text), true, lambda};
}

Segment target_segment(std::string text) {
    return Segment{SegRole::Target, std::move(text), true, 1.0};
}

std::string render_chunk_block(const CodeChunk& chunk) {
    std::string out;
    out.reserve(chunk.text().size() + chunk.lines.size() * 2 + chunk.path.size() + 96);
    out += "# -----\n";
    out += "# the below code fragment can be found in:\n";
    out += "# ";
    out += chunk.path;
    out += "\n";
    out += "# -----\n";
    for (const auto& line : chunk.lines) {
        out += "# ";
        out += line;
        out += "\n";
    }
    return out;
}

} // namespace repoctx
