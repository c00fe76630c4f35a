#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace conther::cli {

using Assignments = std::vector<std::pair<std::string, std::string>>;

/// Sectioned key=value text. A "[section]" line qualifies the keys below it
/// ("[td3]" then "gamma = 0.9" gives "td3.gamma"); '#' starts a comment.
/// Throws ConfigError naming `source` and the line on malformed input.
Assignments parse_config_text(std::string_view text, const std::string& source = "<config>");

/// One "key=value" override, as passed to --set.
std::pair<std::string, std::string> parse_override(std::string_view text);

/// Everything needed to repeat a run, written as manifest.json in the run
/// directory. `config` is the full config snapshot in key=value form.
struct RunManifest {
  std::string variant;
  std::uint64_t seed = 0;
  std::string config;
  std::string started;   // UTC, ISO 8601
  std::string finished;  // empty while running
  std::string status;    // "running", "completed" or "failed: <reason>"
  std::string output_dir;
  std::string metrics;
  std::string actor_checkpoint;
  std::string critic_checkpoint;
};

std::string manifest_to_json(const RunManifest& m);
/// Throws FormatError on missing fields or bad JSON.
RunManifest manifest_from_json(std::string_view text);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// A ".json" path is read as a run manifest (its config snapshot); anything
/// else as config text.
Assignments load_config_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace conther::cli
