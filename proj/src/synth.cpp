#include "repoctx/synth.hpp"
#include "repoctx/errors.hpp"
#include "repoctx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace repoctx {

namespace {

std::string pad6(int n) {
    char buf[16];
    snprintf(buf, sizeof(buf), "%06d", n);
    return buf;
}

// "tok = tok" lines keep token sets minimal: no stray digits or shared
// keywords leaking across instances.
std::string self_assign(const std::string& token) {
    return token + " = " + token;
}

SourceFile make_file(std::string path, std::vector<std::string> lines) {
    SourceFile f;
    f.path = std::move(path);
    f.lines = std::move(lines);
    return f;
}

} // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
    SynthCorpus corpus;
    corpus.repo.root_path = "<synthetic>";
    corpus.repo.language_filter = {".py"};
    Rng rng(cfg.seed);

    for (int i = 0; i < cfg.n_instances; ++i) {
        const std::string id6 = pad6(i);
        const std::string anchor = "anchor_" + id6;
        auto q = [&](int j) { return "q_" + id6 + "_" + std::to_string(j % 8); };
        auto t = [&](int j) { return "t_" + id6 + "_" + std::to_string(j); };

        std::vector<std::string> target_lines = {
            "    value_" + id6 + " = mix_" + id6 + "(" + t(0) + ", " + t(1) + ", " + t(2) + ")",
            "    emit_" + id6 + "(value_" + id6 + ", " + t(3) + ")",
        };
        std::string target_text = join_lines(target_lines);

        // Target file: local imports, a query block forming the retrieval
        // window, the anchor, then the hole.
        std::vector<std::string> prefix = {
            "import instlib_" + id6 + "_0",
            "import instlib_" + id6 + "_1",
            "import instlib_" + id6 + "_2",
            "def setup_" + id6 + "():",
        };
        for (int j = 0; j < 8; ++j) prefix.push_back("    " + self_assign(q(j)));
        prefix.push_back("    # " + anchor);

        std::vector<std::string> suffix = {
            "    done_" + id6 + " = finish_" + id6 + "()",
            "    return done_" + id6,
        };

        CompletionInstance inst;
        inst.id = "synth_" + id6;
        inst.target_path = "inst_" + id6 + "_main.py";
        inst.prefix_lines = prefix;
        inst.target_lines = target_lines;
        inst.setting = rng.bernoulli(cfg.infill_fraction) ? Setting::Infilling
                                                          : Setting::LeftToRight;
        if (inst.setting == Setting::Infilling) inst.suffix_lines = suffix;

        std::vector<std::string> main_lines = prefix;
        main_lines.insert(main_lines.end(), target_lines.begin(), target_lines.end());
        main_lines.insert(main_lines.end(), suffix.begin(), suffix.end());
        corpus.repo.files.push_back(make_file(inst.target_path, main_lines));

        PlantedInstance planted;
        planted.id = inst.id;
        planted.anchor = anchor;

        // One short library file per planted chunk; files stay under the
        // window size so each maps to exactly one retrieval chunk.
        int chunk_no = 0;
        auto plant_chunk = [&](Polarity expected, int query_lines,
                               const std::vector<std::string>& payload) {
            std::string path = "instlib_" + id6 + "_" + std::to_string(chunk_no) + ".py";
            std::vector<std::string> lines;
            for (int l = 0; l < query_lines; ++l) {
                lines.push_back(self_assign(q(2 * chunk_no + l)));
            }
            lines.insert(lines.end(), payload.begin(), payload.end());
            corpus.repo.files.push_back(make_file(path, lines));
            planted.chunks.push_back({path, expected});
            ++chunk_no;
        };

        // Helpful chunks carry the target verbatim behind a single query
        // line, enough to dominate the edit-similarity sufficiency bar.
        for (int h = 0; h < cfg.plant.helpful; ++h) {
            plant_chunk(Polarity::Positive, 1, target_lines);
        }
        std::string decoy_line = "value_" + id6 + " = " + cfg.decoy_prefix + "_" + id6 +
                                 "_fn(" + cfg.decoy_prefix + "_" + id6 + "_a)";
        std::string decoy_completion =
            "    " + decoy_line + "\n    emit_" + id6 + "(value_" + id6 + ", " +
            cfg.decoy_prefix + "_" + id6 + "_b)";
        for (int m = 0; m < cfg.plant.misleading; ++m) {
            plant_chunk(Polarity::Negative, 2, {decoy_line});
        }
        for (int z = 0; z < cfg.plant.irrelevant; ++z) {
            std::string ztok = "z_" + id6 + "_" + std::to_string(z) + "_";
            plant_chunk(Polarity::Neutral, 2,
                        {self_assign(ztok + "u"), self_assign(ztok + "v")});
        }

        OracleScript script;
        script.anchor = anchor;
        script.target = target_text;
        script.correct = target_text;
        script.decoyed = decoy_completion;
        script.fallback = "";
        corpus.scripts.push_back(std::move(script));

        corpus.instances.push_back(std::move(inst));
        corpus.plant.push_back(std::move(planted));
    }

    std::sort(corpus.repo.files.begin(), corpus.repo.files.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });
    return corpus;
}

void write_synth_corpus(const SynthCorpus& corpus, const fs::path& out_dir) {
    fs::create_directories(out_dir / "repo");
    for (const auto& f : corpus.repo.files) {
        fs::path p = out_dir / "repo" / f.path;
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(ErrCode::IoError, "cannot write " + p.string());
        out << f.content();
    }

    {
        std::ofstream out(out_dir / "tasks.jsonl");
        if (!out) throw Error(ErrCode::IoError, "cannot write tasks.jsonl");
        for (const auto& inst : corpus.instances) {
            json j{{"id", inst.id},
                   {"target_path", inst.target_path},
                   {"prefix", inst.prefix_text()},
                   {"suffix", inst.suffix_text()},
                   {"target", inst.target_text()},
                   {"setting", setting_name(inst.setting)}};
            out << j.dump() << "\n";
        }
    }

    {
        std::ofstream out(out_dir / "plant.jsonl");
        if (!out) throw Error(ErrCode::IoError, "cannot write plant.jsonl");
        for (size_t i = 0; i < corpus.plant.size(); ++i) {
            const auto& p = corpus.plant[i];
            const auto& s = corpus.scripts[i];
            json chunks = json::array();
            for (const auto& c : p.chunks) {
                chunks.push_back(json{{"path", c.path}, {"expected", polarity_name(c.expected)}});
            }
            json j{{"id", p.id},          {"anchor", p.anchor},   {"target", s.target},
                   {"correct", s.correct}, {"decoyed", s.decoyed}, {"fallback", s.fallback},
                   {"chunks", chunks}};
            out << j.dump() << "\n";
        }
    }
}

std::vector<OracleScript> load_oracle_scripts(const fs::path& plant_file) {
    std::ifstream in(plant_file);
    if (!in) throw Error(ErrCode::IoError, "cannot read " + plant_file.string());
    std::vector<OracleScript> scripts;
    std::string line;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        json j = json::parse(line);
        OracleScript s;
        s.anchor = j.at("anchor");
        s.target = j.at("target");
        s.correct = j.at("correct");
        s.decoyed = j.at("decoyed");
        s.fallback = j.value("fallback", "");
        scripts.push_back(std::move(s));
    }
    return scripts;
}

} // namespace repoctx
