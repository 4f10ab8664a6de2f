#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace repoctx {

struct SourceFile {
    std::string path;                 // repo-relative, '/' separated
    std::vector<std::string> lines;   // no trailing newline characters

    std::string content() const;
    size_t line_count() const { return lines.size(); }
};

struct RepoSnapshot {
    std::string root_path;
    std::vector<SourceFile> files;    // sorted lexicographically by path
    std::vector<std::string> language_filter;
    std::vector<std::string> warnings;

    const SourceFile* find(const std::string& path) const;
};

enum class Setting { Infilling, LeftToRight };

const char* setting_name(Setting s);
std::optional<Setting> parse_setting(const std::string& name);

struct CompletionInstance {
    std::string id;
    std::string target_path;
    std::vector<std::string> prefix_lines;   // C_p
    std::vector<std::string> suffix_lines;   // C_s, empty in left-to-right
    std::vector<std::string> target_lines;   // ground truth, may be empty at inference
    Setting setting = Setting::Infilling;

    std::string prefix_text() const;
    std::string suffix_text() const;
    std::string target_text() const;
    bool has_target() const { return !target_lines.empty(); }
};

// Unreadable root throws Error{IoError}; individual unreadable files are
// skipped with a warning record on the snapshot. Symlinks are not followed.
RepoSnapshot load_repo(const std::filesystem::path& root,
                       const std::vector<std::string>& extensions = {".py"});

struct InstanceLoadResult {
    std::vector<CompletionInstance> instances;
    std::vector<std::string> errors;   // one entry per rejected record
};

// Task file is JSONL: {id, target_path, prefix, suffix, target, setting}.
// With require_target, records lacking a target are rejected. Throws
// Error{NoValidInstances} when nothing survives.
InstanceLoadResult load_instances(const std::filesystem::path& task_file,
                                  bool require_target);

// Number of import statements whose module resolves inside the repo, judged
// lexically: dot-relative imports, or a first path segment matching a
// top-level directory or root-level module file.
int count_local_imports(const SourceFile& file, const RepoSnapshot& repo);

} // namespace repoctx
