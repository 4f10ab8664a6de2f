#include "repoctx/corpus.hpp"
#include "repoctx/errors.hpp"
#include "repoctx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace repoctx {

std::string SourceFile::content() const {
    return join_lines(lines);
}

const SourceFile* RepoSnapshot::find(const std::string& path) const {
    auto it = std::lower_bound(files.begin(), files.end(), path,
                               [](const SourceFile& f, const std::string& p) { return f.path < p; });
    if (it != files.end() && it->path == path) return &*it;
    return nullptr;
}

const char* setting_name(Setting s) {
    return s == Setting::Infilling ? "infilling" : "left_to_right";
}

std::optional<Setting> parse_setting(const std::string& name) {
    if (name == "infilling") return Setting::Infilling;
    if (name == "left_to_right") return Setting::LeftToRight;
    return std::nullopt;
}

std::string CompletionInstance::prefix_text() const { return join_lines(prefix_lines); }
std::string CompletionInstance::suffix_text() const { return join_lines(suffix_lines); }
std::string CompletionInstance::target_text() const { return join_lines(target_lines); }

namespace {

bool extension_matches(const fs::path& p, const std::vector<std::string>& extensions) {
    if (extensions.empty()) return true;
    std::string ext = p.extension().string();
    return std::find(extensions.begin(), extensions.end(), ext) != extensions.end();
}

std::string relative_slash_path(const fs::path& file, const fs::path& root) {
    return fs::relative(file, root).generic_string();
}

} // namespace

RepoSnapshot load_repo(const fs::path& root, const std::vector<std::string>& extensions) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw Error(ErrCode::IoError, "repo root is not a readable directory: " + root.string());
    }

    RepoSnapshot snap;
    snap.root_path = root.string();
    snap.language_filter = extensions;

    std::vector<fs::path> paths;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    fs::recursive_directory_iterator end;
    for (; it != end; it.increment(ec)) {
        if (ec) break;
        if (it->is_symlink(ec)) {
            if (it->is_directory(ec)) it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file(ec)) continue;
        if (!extension_matches(it->path(), extensions)) continue;
        paths.push_back(it->path());
    }

    std::sort(paths.begin(), paths.end(), [&](const fs::path& a, const fs::path& b) {
        return relative_slash_path(a, root) < relative_slash_path(b, root);
    });

    std::vector<SourceFile> files(paths.size());
    std::vector<std::string> warnings(paths.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < static_cast<long>(paths.size()); ++i) {
        const fs::path& p = paths[static_cast<size_t>(i)];
        std::ifstream in(p, std::ios::binary);
        if (!in) {
            warnings[static_cast<size_t>(i)] = "unreadable file skipped: " + relative_slash_path(p, root);
            continue;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        bool had_invalid = false;
        std::string text = utf8_sanitize(buf.str(), &had_invalid);
        SourceFile f;
        f.path = relative_slash_path(p, root);
        f.lines = split_lines(text);
        files[static_cast<size_t>(i)] = std::move(f);
        if (had_invalid) {
            warnings[static_cast<size_t>(i)] =
                "invalid UTF-8 replaced in: " + relative_slash_path(p, root);
        }
    }

    for (size_t i = 0; i < files.size(); ++i) {
        if (!files[i].path.empty()) snap.files.push_back(std::move(files[i]));
        if (!warnings[i].empty()) snap.warnings.push_back(std::move(warnings[i]));
    }
    return snap;
}

namespace {

std::string json_string_or(const json& j, const char* key, const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return fallback;
    return it->get<std::string>();
}

} // namespace

InstanceLoadResult load_instances(const fs::path& task_file, bool require_target) {
    std::ifstream in(task_file);
    if (!in) {
        throw Error(ErrCode::IoError, "cannot open task file: " + task_file.string());
    }

    InstanceLoadResult out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty() || starts_with(strip(line), "#")) continue;
        std::string where = task_file.filename().string() + ":" + std::to_string(line_no);

        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            out.errors.push_back(where + ": not a JSON object");
            continue;
        }
        std::string id = json_string_or(j, "id", "");
        std::string target_path = json_string_or(j, "target_path", "");
        if (id.empty() || target_path.empty()) {
            out.errors.push_back(where + ": missing id or target_path");
            continue;
        }
        auto setting = parse_setting(json_string_or(j, "setting", ""));
        if (!setting) {
            out.errors.push_back(where + ": unknown setting (want infilling|left_to_right)");
            continue;
        }

        CompletionInstance inst;
        inst.id = id;
        inst.target_path = target_path;
        inst.setting = *setting;
        inst.prefix_lines = split_lines(json_string_or(j, "prefix", ""));
        std::string suffix = json_string_or(j, "suffix", "");
        inst.suffix_lines = suffix.empty() ? std::vector<std::string>{} : split_lines(suffix);
        std::string target = json_string_or(j, "target", "");
        inst.target_lines = target.empty() ? std::vector<std::string>{} : split_lines(target);

        if (inst.setting == Setting::LeftToRight && !inst.suffix_lines.empty()) {
            out.errors.push_back(where + ": left_to_right record carries a non-empty suffix");
            continue;
        }
        if (require_target && !inst.has_target()) {
            out.errors.push_back(where + ": record lacks a target but one is required");
            continue;
        }
        out.instances.push_back(std::move(inst));
    }

    if (out.instances.empty()) {
        throw Error(ErrCode::NoValidInstances,
                    "no valid instance records in " + task_file.string());
    }
    return out;
}

namespace {

// Top-level names a lexically-local import can resolve to: first path
// component of nested files, stem of root-level files.
std::unordered_set<std::string> top_level_names(const RepoSnapshot& repo) {
    std::unordered_set<std::string> names;
    for (const auto& f : repo.files) {
        size_t slash = f.path.find('/');
        if (slash == std::string::npos) {
            size_t dot = f.path.rfind('.');
            names.insert(dot == std::string::npos ? f.path : f.path.substr(0, dot));
        } else {
            names.insert(f.path.substr(0, slash));
        }
    }
    return names;
}

std::string first_segment(std::string_view dotted) {
    size_t dot = dotted.find('.');
    return std::string(dot == std::string::npos ? dotted : dotted.substr(0, dot));
}

// "a.b as c, d.e" -> {"a.b", "d.e"}
std::vector<std::string> split_import_list(std::string_view list) {
    std::vector<std::string> modules;
    size_t start = 0;
    while (start <= list.size()) {
        size_t comma = list.find(',', start);
        std::string item = strip(list.substr(start, comma == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : comma - start));
        size_t as_pos = item.find(" as ");
        if (as_pos != std::string::npos) item = strip(item.substr(0, as_pos));
        if (!item.empty()) modules.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return modules;
}

} // namespace

int count_local_imports(const SourceFile& file, const RepoSnapshot& repo) {
    auto names = top_level_names(repo);
    int count = 0;
    for (const auto& raw : file.lines) {
        std::string line = strip(raw);
        bool local = false;
        if (starts_with(line, "import ")) {
            for (const auto& mod : split_import_list(std::string_view(line).substr(7))) {
                if (names.count(first_segment(mod))) { local = true; break; }
            }
        } else if (starts_with(line, "from ")) {
            size_t import_pos = line.find(" import ");
            if (import_pos == std::string::npos) continue;
            std::string mod = strip(std::string_view(line).substr(5, import_pos - 5));
            if (mod.empty()) continue;
            if (mod[0] == '.') local = true;       // relative import stays in-repo
            else local = names.count(first_segment(mod)) > 0;
        }
        if (local) ++count;
    }
    return count;
}

} // namespace repoctx
