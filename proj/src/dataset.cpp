#include "repoctx/dataset.hpp"
#include "repoctx/errors.hpp"
#include "repoctx/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>

using nlohmann::json;

namespace repoctx {

bool is_eligible_target(const std::vector<std::string>& target_lines) {
    if (target_lines.empty()) return false;
    bool any_content = false;
    int tokens = 0;
    for (const auto& raw : target_lines) {
        std::string line = strip(raw);
        if (starts_with(line, "import ") || starts_with(line, "from ")) return false;
        if (!line.empty() && !starts_with(line, "#")) any_content = true;
        tokens += static_cast<int>(tokenize_all(raw).size());
    }
    return any_content && tokens >= 6;
}

namespace {

struct Span {
    size_t begin = 0;   // 0-based, inclusive
    size_t count = 0;
};

// A def line plus its indented body, found lexically.
std::vector<Span> function_spans(const SourceFile& file, int max_lines) {
    std::vector<Span> spans;
    const auto& lines = file.lines;
    auto indent_of = [](const std::string& l) {
        size_t i = 0;
        while (i < l.size() && (l[i] == ' ' || l[i] == '\t')) ++i;
        return i;
    };
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string s = strip(lines[i]);
        if (!(starts_with(s, "def ") || starts_with(s, "async def "))) continue;
        size_t base = indent_of(lines[i]);
        size_t end = i + 1;
        while (end < lines.size()) {
            std::string body = strip(lines[end]);
            if (body.empty()) {
                ++end;
                continue;
            }
            if (indent_of(lines[end]) <= base) break;
            ++end;
        }
        while (end > i + 1 && strip(lines[end - 1]).empty()) --end;   // drop blank tail
        size_t count = end - i;
        if (count >= 2 && count < static_cast<size_t>(max_lines)) {
            spans.push_back({i, count});
        }
    }
    return spans;
}

TargetKind draw_kind(const SamplingConfig& cfg, Rng& rng) {
    double total = cfg.weight_single + cfg.weight_chunk + cfg.weight_function;
    double r = rng.unit() * total;
    if (r < cfg.weight_single) return TargetKind::SingleLine;
    if (r < cfg.weight_single + cfg.weight_chunk) return TargetKind::Chunk;
    return TargetKind::Function;
}

} // namespace

SampleResult sample_targets(const RepoSnapshot& repo, const SamplingConfig& cfg) {
    SampleResult out;
    Rng rng(cfg.rng_seed);

    std::vector<const SourceFile*> eligible;
    for (const auto& f : repo.files) {
        if (f.lines.size() < 2) continue;
        if (count_local_imports(f, repo) >= cfg.min_local_imports) eligible.push_back(&f);
    }
    if (eligible.empty()) {
        out.report.push_back("no file has >= " + std::to_string(cfg.min_local_imports) +
                             " local imports; nothing to sample");
        return out;
    }

    const int attempts_per_target = 50;
    for (int n = 0; n < cfg.targets_per_repo; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < attempts_per_target && !placed; ++attempt) {
            const SourceFile& file = *eligible[rng.bounded(eligible.size())];
            const size_t line_count = file.lines.size();
            TargetKind kind = draw_kind(cfg, rng);

            Span span;
            if (kind == TargetKind::SingleLine) {
                // start at line 2 so the prefix is never empty
                span = {1 + static_cast<size_t>(rng.bounded(line_count - 1)), 1};
            } else if (kind == TargetKind::Chunk) {
                size_t len = static_cast<size_t>(
                    rng.range(cfg.chunk_min_lines, cfg.chunk_max_lines));
                if (len + 1 > line_count) continue;
                span.begin = 1 + static_cast<size_t>(rng.bounded(line_count - len));
                span.count = len;
            } else {
                auto spans = function_spans(file, cfg.function_max_lines);
                std::vector<Span> usable;
                for (const auto& s : spans) {
                    if (s.begin >= 1) usable.push_back(s);
                }
                if (usable.empty()) continue;
                span = usable[rng.bounded(usable.size())];
            }
            if (span.begin + span.count > line_count) continue;

            std::vector<std::string> target(file.lines.begin() + static_cast<long>(span.begin),
                                            file.lines.begin() +
                                                static_cast<long>(span.begin + span.count));
            if (!is_eligible_target(target)) continue;

            CompletionInstance inst;
            inst.id = "sample_" + std::to_string(out.instances.size());
            inst.target_path = file.path;
            inst.prefix_lines.assign(file.lines.begin(),
                                     file.lines.begin() + static_cast<long>(span.begin));
            inst.target_lines = std::move(target);
            std::vector<std::string> suffix(file.lines.begin() +
                                                static_cast<long>(span.begin + span.count),
                                            file.lines.end());
            inst.setting = rng.bernoulli(cfg.infill_fraction) ? Setting::Infilling
                                                              : Setting::LeftToRight;
            if (inst.setting == Setting::Infilling) {
                inst.suffix_lines = std::move(suffix);
            }
            out.instances.push_back(std::move(inst));
            placed = true;
        }
        if (!placed) {
            out.report.push_back("gave up on target " + std::to_string(n) + " after " +
                                 std::to_string(attempts_per_target) + " attempts");
        }
    }
    return out;
}

bool sufficiency_filter(const CompletionInstance& instance,
                        const std::vector<LabeledChunk>& labeled, double threshold) {
    std::string target = instance.target_text();
    double best = 0.0;

    for (const auto& lc : labeled) {
        if (lc.label.value != Polarity::Positive) continue;
        best = std::max(best, edit_similarity(lc.chunk.text(), target));
        if (best > threshold) return true;
    }

    size_t height = instance.target_lines.size();
    auto scan = [&](const std::vector<std::string>& lines) {
        if (height == 0 || lines.size() < height) return;
        for (size_t i = 0; i + height <= lines.size(); ++i) {
            std::vector<std::string> window(lines.begin() + static_cast<long>(i),
                                            lines.begin() + static_cast<long>(i + height));
            best = std::max(best, edit_similarity(join_lines(window), target));
            if (best > threshold) return;
        }
    };
    scan(instance.prefix_lines);
    if (best <= threshold) scan(instance.suffix_lines);
    return best > threshold;
}

const char* record_format_name(RecordFormat format) {
    return format == RecordFormat::AllCandidates ? "all_candidates" : "positive_only";
}

bool parse_record_format(const std::string& name, RecordFormat& out) {
    if (name == "all_candidates") {
        out = RecordFormat::AllCandidates;
        return true;
    }
    if (name == "positive_only") {
        out = RecordFormat::PositiveOnly;
        return true;
    }
    return false;
}

namespace {

const std::string& polarity_token(const SignalTokens& signal, Polarity p) {
    switch (p) {
        case Polarity::Positive: return signal.pos;
        case Polarity::Negative: return signal.neg;
        default: return signal.neu;
    }
}

void push_in_file(TrainingRecord& rec, const CompletionInstance& instance,
                  const VerbalizeSpec& spec) {
    rec.segments.push_back(context_segment(SegRole::PrefixMarker, spec.fim.prefix));
    rec.segments.push_back(context_segment(SegRole::LeftContext, instance.prefix_text()));
    rec.segments.push_back(context_segment(SegRole::SuffixMarker, spec.fim.suffix));
    rec.segments.push_back(context_segment(SegRole::RightContext, instance.suffix_text()));
}

void push_chunk(TrainingRecord& rec, const LabeledChunk& lc, const VerbalizeSpec& spec) {
    rec.segments.push_back(signal_segment(SegRole::MC, spec.signal.mc, spec.lambda));
    rec.segments.push_back(context_segment(SegRole::ChunkBody, render_chunk_block(lc.chunk)));
    rec.segments.push_back(signal_segment(SegRole::PolarityToken,
                                          polarity_token(spec.signal, lc.label.value),
                                          spec.lambda));
}

} // namespace

TrainingRecord verbalize(const CompletionInstance& instance,
                         const std::vector<LabeledChunk>& labeled, RecordFormat format,
                         const VerbalizeSpec& spec, Rng& rng) {
    std::vector<const LabeledChunk*> usable;
    std::vector<const LabeledChunk*> positives;
    for (const auto& lc : labeled) {
        if (lc.label.value == Polarity::Unavailable) continue;
        usable.push_back(&lc);
        if (lc.label.value == Polarity::Positive) positives.push_back(&lc);
    }

    TrainingRecord rec;
    rec.instance_id = instance.id;
    rec.format = format;
    push_in_file(rec, instance, spec);

    if (format == RecordFormat::AllCandidates) {
        if (positives.empty()) {
            throw Error(ErrCode::FormatInapplicable,
                        "all-candidates format needs at least one positive chunk", instance.id);
        }
        std::vector<const LabeledChunk*> order = usable;
        rng.shuffle(order);
        // move one randomly chosen positive to the back
        std::vector<const LabeledChunk*> remaining_pos;
        for (auto* p : order) {
            if (p->label.value == Polarity::Positive) remaining_pos.push_back(p);
        }
        const LabeledChunk* last = remaining_pos[rng.bounded(remaining_pos.size())];
        order.erase(std::find(order.begin(), order.end(), last));
        order.push_back(last);

        for (auto* lc : order) push_chunk(rec, *lc, spec);
        rec.segments.push_back(signal_segment(SegRole::EC, spec.signal.ec, spec.lambda));
        rec.segments.push_back(context_segment(SegRole::MiddleMarker, spec.fim.middle));
        return rec;
    }

    // PositiveOnly keeps retrieval-rank order (the input order).
    for (auto* lc : positives) push_chunk(rec, *lc, spec);
    rec.segments.push_back(signal_segment(SegRole::EC, spec.signal.ec, spec.lambda));
    rec.segments.push_back(context_segment(SegRole::MiddleMarker, spec.fim.middle));
    rec.segments.push_back(target_segment(instance.target_text()));
    return rec;
}

bool validate_record(const TrainingRecord& record, const VerbalizeSpec& spec, std::string* why) {
    auto fail = [&](const std::string& message) {
        if (why) *why = message;
        return false;
    };

    // Role sequence as a compact string, then a shape check against the
    // verbalization grammar.
    std::string shape;
    for (const auto& s : record.segments) {
        switch (s.role) {
            case SegRole::PrefixMarker: shape += 'P'; break;
            case SegRole::LeftContext: shape += 'L'; break;
            case SegRole::SuffixMarker: shape += 'S'; break;
            case SegRole::RightContext: shape += 'R'; break;
            case SegRole::MC: shape += 'M'; break;
            case SegRole::ChunkBody: shape += 'C'; break;
            case SegRole::PolarityToken: shape += 'o'; break;
            case SegRole::EC: shape += 'E'; break;
            case SegRole::MiddleMarker: shape += 'D'; break;
            case SegRole::Target: shape += 'T'; break;
        }
    }
    if (!starts_with(shape, "PLSR")) return fail("record must open with prefix/suffix context");
    size_t i = 4;
    int chunks = 0;
    while (i + 2 < shape.size() && shape[i] == 'M') {
        if (shape[i + 1] != 'C' || shape[i + 2] != 'o') return fail("malformed chunk block");
        i += 3;
        ++chunks;
    }
    if (i >= shape.size() || shape[i] != 'E') return fail("chunk sequence must close with <EC>");
    ++i;
    if (i >= shape.size() || shape[i] != 'D') return fail("<EC> must be followed by the middle marker");
    ++i;
    if (record.format == RecordFormat::AllCandidates) {
        if (i != shape.size()) return fail("all-candidates record must end at the middle marker");
        if (chunks == 0) return fail("all-candidates record carries no chunks");
    } else {
        if (i + 1 != shape.size() || shape[i] != 'T') {
            return fail("positive-only record must end with exactly one target");
        }
    }

    // Token/mask constraints.
    std::string last_polarity;
    for (const auto& s : record.segments) {
        bool should_supervise = seg_role_supervisable(s.role);
        if (s.supervised != should_supervise) return fail("supervision flag out of place");
        double want = seg_role_is_signal(s.role) ? spec.lambda
                                                 : (s.role == SegRole::Target ? 1.0 : 0.0);
        if (s.loss_weight != want) return fail("loss weight out of place");
        if (s.role == SegRole::PolarityToken) {
            if (s.text != spec.signal.pos && s.text != spec.signal.neg &&
                s.text != spec.signal.neu) {
                return fail("unknown polarity token " + s.text);
            }
            if (record.format == RecordFormat::PositiveOnly && s.text != spec.signal.pos) {
                return fail("positive-only record contains a non-positive chunk");
            }
            last_polarity = s.text;
        }
        if (s.role == SegRole::MC && s.text != spec.signal.mc) return fail("bad <MC> text");
        if (s.role == SegRole::EC && s.text != spec.signal.ec) return fail("bad <EC> text");
    }
    if (record.format == RecordFormat::AllCandidates && last_polarity != spec.signal.pos) {
        return fail("final chunk of an all-candidates record must be positive");
    }
    return true;
}

void export_records(const std::vector<TrainingRecord>& records, std::ostream& out) {
    if (records.empty()) {
        out << "# repoctx training records v1 (empty)\n";
        return;
    }
    for (const auto& rec : records) {
        json segs = json::array();
        for (const auto& s : rec.segments) {
            segs.push_back(json{{"role", seg_role_name(s.role)},
                                {"text", s.text},
                                {"supervised", s.supervised},
                                {"loss_weight", s.loss_weight}});
        }
        json j{{"instance_id", rec.instance_id},
               {"format", record_format_name(rec.format)},
               {"segments", segs}};
        out << j.dump() << "\n";
    }
    if (!out) throw Error(ErrCode::IoError, "dataset export stream failed");
}

void for_each_record(std::istream& in, const std::function<void(TrainingRecord&&)>& sink) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = strip(line);
        if (stripped.empty() || starts_with(stripped, "#")) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrCode::IoError,
                        "malformed dataset record at line " + std::to_string(line_no));
        }
        TrainingRecord rec;
        rec.instance_id = j.at("instance_id").get<std::string>();
        if (!parse_record_format(j.at("format").get<std::string>(), rec.format)) {
            throw Error(ErrCode::IoError,
                        "unknown record format at line " + std::to_string(line_no));
        }
        for (const auto& s : j.at("segments")) {
            Segment seg;
            if (!parse_seg_role(s.at("role").get<std::string>(), seg.role)) {
                throw Error(ErrCode::IoError,
                            "unknown segment role at line " + std::to_string(line_no));
            }
            seg.text = s.at("text").get<std::string>();
            seg.supervised = s.at("supervised").get<bool>();
            seg.loss_weight = s.at("loss_weight").get<double>();
            rec.segments.push_back(std::move(seg));
        }
        sink(std::move(rec));
    }
}

} // namespace repoctx
