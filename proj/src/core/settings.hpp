#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "core/scene.hpp"
#include "core/tracker.hpp"

namespace subpeak {

// Line-based `key = value` files with `#` comments and `[section]` headers.
// Keys before the first header belong to the section named by `default_section`.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& default_section = "");
    static KeyValueConfig load(const std::filesystem::path& path, const std::string& default_section = "");

    bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
    const std::map<std::string, std::string>& section(const std::string& section) const;
    std::vector<std::string> section_names() const;

    void set(const std::string& section, const std::string& key, const std::string& value);

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct RunConfig {
    SceneConfig scene;
    TrackerConfig tracker;
    int repeats = 200;
    std::uint64_t base_seed = 1;
    std::string output_dir = ".";

    void validate() const;
};

// Unknown keys are rejected with ConfigError naming the offending line.
SceneConfig scene_from_config(const KeyValueConfig& kv, SceneConfig base = {});
TrackerConfig tracker_from_config(const KeyValueConfig& kv, TrackerConfig base = {});
RunConfig run_from_config(const KeyValueConfig& kv);

SceneConfig load_scene_config(const std::filesystem::path& path);
TrackerConfig load_tracker_config(const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);

std::string to_config_text(const SceneConfig& cfg);
std::string to_config_text(const TrackerConfig& cfg);

std::string format_double(double v);

}  // namespace subpeak
