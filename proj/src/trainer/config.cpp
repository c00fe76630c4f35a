#include "conther/trainer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "conther/env/protocol.hpp"
#include "conther/error.hpp"

namespace conther::trainer {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

std::string variant_list() {
  std::string s;
  for (auto n : kVariantNames) s += (s.empty() ? "" : ", ") + std::string(n);
  return s;
}

// Field-pointer helpers keep the key table one line per key.
template <class T>
ConfigKey size_key(std::string section, std::string name, std::string help, T TrainConfig::*field) {
  return {std::move(section), std::move(name), std::move(help),
          [field, name](TrainConfig& c, const std::string& v) {
            c.*field = static_cast<T>(parse_unsigned(name, v));
          },
          [field](const TrainConfig& c) { return std::to_string(c.*field); }};
}

ConfigKey real_key(std::string section, std::string name, std::string help, double TrainConfig::*field) {
  return {std::move(section), std::move(name), std::move(help),
          [field, name](TrainConfig& c, const std::string& v) { c.*field = parse_double(name, v); },
          [field](const TrainConfig& c) { return format_double(c.*field); }};
}

ConfigKey bool_key(std::string section, std::string name, std::string help, bool TrainConfig::*field) {
  return {std::move(section), std::move(name), std::move(help),
          [field, name](TrainConfig& c, const std::string& v) { c.*field = parse_bool(name, v); },
          [field](const TrainConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

ConfigKey text_key(std::string section, std::string name, std::string help, std::string TrainConfig::*field) {
  return {std::move(section), std::move(name), std::move(help),
          [field](TrainConfig& c, const std::string& v) { c.*field = v; },
          [field](const TrainConfig& c) { return c.*field; }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  k.push_back(text_key("run", "variant", "learner: " + variant_list(), &TrainConfig::variant));
  k.push_back(size_key("run", "seed", "master seed", &TrainConfig::seed));
  k.push_back(size_key("run", "epochs", "M, training epochs", &TrainConfig::epochs));
  k.push_back(size_key("run", "episodes_per_epoch", "episodes collected per epoch", &TrainConfig::episodes_per_epoch));
  k.push_back(size_key("run", "updates_per_epoch", "S, critic updates per epoch", &TrainConfig::updates_per_epoch));
  k.push_back(text_key("run", "update_cadence", "epoch or episode: when the S updates and the target update run",
                       &TrainConfig::update_cadence));
  k.push_back(size_key("run", "validation_episodes", "noise-free episodes after each epoch",
                       &TrainConfig::validation_episodes));

  k.push_back(size_key("td3", "batch_size", "N, windows per update", &TrainConfig::batch_size));
  k.push_back(real_key("td3", "gamma", "discount", &TrainConfig::gamma));
  k.push_back(real_key("td3", "tau", "soft target update rate", &TrainConfig::tau));
  k.push_back(bool_key("td3", "target_update_per_step", "soft-update targets after every update instead of per epoch",
                       &TrainConfig::target_update_per_step));
  k.push_back(size_key("td3", "actor_delay", "w, actor update period", &TrainConfig::actor_delay));
  k.push_back(real_key("td3", "action_l2", "alpha, action magnitude penalty", &TrainConfig::action_l2));
  k.push_back(real_key("td3", "noise", "sigma, exploration noise", &TrainConfig::noise));
  k.push_back(real_key("td3", "actor_lr", "actor Adam learning rate", &TrainConfig::actor_lr));
  k.push_back(real_key("td3", "critic_lr", "critic Adam learning rate", &TrainConfig::critic_lr));
  k.push_back(bool_key("td3", "target_smoothing", "add clipped noise to target actions", &TrainConfig::target_smoothing));
  k.push_back(real_key("td3", "smoothing_noise", "target action noise std", &TrainConfig::smoothing_noise));
  k.push_back(real_key("td3", "smoothing_clip", "target action noise clip", &TrainConfig::smoothing_clip));

  k.push_back(real_key("replay", "her_fraction", "share of relabeled windows per batch", &TrainConfig::her_fraction));
  k.push_back(size_key("replay", "context_length", "K, past steps per window", &TrainConfig::context_length));
  k.push_back(size_key("replay", "buffer_capacity", "episodes kept", &TrainConfig::buffer_capacity));

  k.push_back({"nets", "wiring", "v0 or v1 (v1 appends the raw last step to the FC input)",
               [](TrainConfig& c, const std::string& v) {
                 if (v == "v0") c.wiring = nets::Wiring::V0;
                 else if (v == "v1") c.wiring = nets::Wiring::V1;
                 else throw ConfigError("wiring: expected v0 or v1, got '" + v + "'");
               },
               [](const TrainConfig& c) { return nets::to_string(c.wiring); }});
  k.push_back(size_key("nets", "d_model", "transformer width", &TrainConfig::d_model));
  k.push_back(size_key("nets", "heads", "attention heads", &TrainConfig::heads));
  k.push_back(size_key("nets", "ff_width", "transformer feed-forward width", &TrainConfig::ff_width));
  k.push_back(size_key("nets", "hidden", "FC hidden width", &TrainConfig::hidden));

  k.push_back(text_key("env", "arm", "planarN, spatial3 or spatial6", &TrainConfig::arm));
  k.push_back(text_key("env", "task", "reach, sinusoid, circle or spiral", &TrainConfig::task));
  k.push_back(text_key("env", "remote", "host:port of an env server; empty runs in-process", &TrainConfig::remote));
  return k;
}

}  // namespace

void TrainConfig::validate() const {
  if (std::find(std::begin(kVariantNames), std::end(kVariantNames), variant) == std::end(kVariantNames)) {
    throw ConfigError("unknown variant '" + variant + "'; valid: " + variant_list());
  }
  if (epochs == 0 || episodes_per_epoch == 0) throw ConfigError("epochs and episodes_per_epoch must be >= 1");
  if (update_cadence != "epoch" && update_cadence != "episode") {
    throw ConfigError("update_cadence must be epoch or episode, got '" + update_cadence + "'");
  }
  if (validation_episodes == 0) throw ConfigError("validation_episodes must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (actor_delay == 0) throw ConfigError("actor_delay must be >= 1");
  if (action_l2 < 0.0 || noise < 0.0 || smoothing_noise < 0.0 || smoothing_clip < 0.0) {
    throw ConfigError("action_l2, noise and smoothing parameters must be non-negative");
  }
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (her_fraction < 0.0 || her_fraction > 1.0) throw ConfigError("her_fraction must lie in [0, 1]");
  if ((variant == "td3" || variant == "td3_her") && context_length != 0) {
    throw ConfigError("variant " + variant + " is single-step; context_length must be 0");
  }
  if (buffer_capacity == 0) throw ConfigError("buffer_capacity must be >= 1");
  if (heads == 0 || d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (hidden == 0 || ff_width == 0) throw ConfigError("hidden and ff_width must be >= 1");
  make_arm(arm);
  make_task(task);
  if (task != "reach" && make_arm(arm).is_planar()) {
    throw ConfigError("task " + task + " moves the goal vertically and needs a spatial arm (spatial3 or spatial6)");
  }
  if (!remote.empty()) env::parse_address(remote);
}

TrainConfig build_variant(std::string_view name) {
  TrainConfig c;
  c.variant = std::string(name);
  if (name == "conther_v0") {
    c.wiring = nets::Wiring::V0;
  } else if (name == "td3") {
    c.context_length = 0;
    c.her_fraction = 0.0;
  } else if (name == "td3_her") {
    c.context_length = 0;
  } else if (name == "td3_context") {
    c.her_fraction = 0.0;
  } else if (name != "conther_v1") {
    throw ConfigError("unknown variant '" + std::string(name) + "'; valid: " + variant_list());
  }
  return c;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

const ConfigKey& find_key(std::string_view key) {
  for (const auto& k : config_keys()) {
    if (key == k.name || key == k.qualified()) return k;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + valid_keys_text());
}

std::string valid_keys_text() {
  std::string s;
  for (const auto& k : config_keys()) s += (s.empty() ? "" : " ") + k.qualified();
  return s;
}

TrainConfig config_from_assignments(const std::vector<std::pair<std::string, std::string>>& assignments) {
  std::string variant = "conther_v1";
  for (const auto& [key, value] : assignments) {
    if (&find_key(key) == &find_key("variant")) variant = value;
  }
  TrainConfig c = build_variant(variant);
  for (const auto& [key, value] : assignments) {
    const ConfigKey& k = find_key(key);
    if (k.name != "variant") k.set(c, value);
  }
  c.validate();
  return c;
}

std::string format_config(const TrainConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(config) << '\n';
  }
  return out.str();
}

env::ArmModel make_arm(const std::string& name) {
  if (name == "spatial6") return env::ArmModel::spatial6();
  if (name == "spatial3") return env::ArmModel::spatial3();
  if (name.rfind("planar", 0) == 0 && name.size() > 6) {
    const std::string digits = name.substr(6);
    std::size_t joints = 0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), joints);
    if (res.ec == std::errc{} && res.ptr == digits.data() + digits.size() && joints >= 2 && joints <= 6) {
      return env::ArmModel::planar(joints);
    }
  }
  throw ConfigError("unknown arm '" + name + "'; use planar2..planar6, spatial3 or spatial6");
}

env::TaskSpec make_task(const std::string& name) {
  env::TaskKind kind;
  try {
    kind = env::parse_task_kind(name);
  } catch (const std::exception&) {
    throw ConfigError("unknown task '" + name + "'; use reach, sinusoid, circle or spiral");
  }
  return kind == env::TaskKind::Reach ? env::TaskSpec::reach() : env::TaskSpec::trajectory_task(kind);
}

std::unique_ptr<env::Environment> make_env(const TrainConfig& config) {
  env::ArmModel arm = make_arm(config.arm);
  env::TaskSpec task = make_task(config.task);
  if (!config.remote.empty()) return std::make_unique<env::RemoteEnv>(config.remote, std::move(arm), std::move(task));
  return std::make_unique<env::KinematicEnv>(std::move(arm), std::move(task));
}

nets::NetConfig net_config(const TrainConfig& config, std::size_t obs_dim, std::size_t goal_dim,
                           std::size_t action_dim) {
  nets::NetConfig n;
  n.input_dim = obs_dim + goal_dim;
  n.action_dim = action_dim;
  n.window = config.context_length + 1;
  n.wiring = config.wiring;
  n.d_model = config.d_model;
  n.heads = config.heads;
  n.ff_width = config.ff_width;
  n.hidden = config.hidden;
  return n;
}

}  // namespace conther::trainer
