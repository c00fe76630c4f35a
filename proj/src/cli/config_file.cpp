#include "conther/cli/config_file.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "conther/error.hpp"

namespace conther::cli {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Assignments parse_config_text(std::string_view text, const std::string& source) {
  Assignments out;
  std::string section;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where() + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where() + "empty key");
    out.emplace_back(section.empty() ? key : section + "." + key, std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

std::pair<std::string, std::string> parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || trim(text.substr(0, eq)).empty()) {
    throw ConfigError("override '" + std::string(text) + "' is not key=value");
  }
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

std::string manifest_to_json(const RunManifest& m) {
  const json j = {{"variant", m.variant},
                  {"seed", m.seed},
                  {"config", m.config},
                  {"started", m.started},
                  {"finished", m.finished},
                  {"status", m.status},
                  {"output_dir", m.output_dir},
                  {"artifacts",
                   {{"metrics", m.metrics}, {"actor_checkpoint", m.actor_checkpoint},
                    {"critic_checkpoint", m.critic_checkpoint}}}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.variant = j.at("variant").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config").get<std::string>();
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.status = j.value("status", "");
    m.output_dir = j.value("output_dir", "");
    if (j.contains("artifacts")) {
      const auto& a = j.at("artifacts");
      m.metrics = a.value("metrics", "");
      m.actor_checkpoint = a.value("actor_checkpoint", "");
      m.critic_checkpoint = a.value("critic_checkpoint", "");
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_text_file(path, manifest_to_json(m));
}

RunManifest read_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Assignments load_config_file(const std::filesystem::path& path) {
  if (path.extension() == ".json") return parse_config_text(read_manifest(path).config, path.string());
  return parse_config_text(read_text_file(path), path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace conther::cli
