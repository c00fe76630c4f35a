#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "conther/env/environment.hpp"
#include "conther/nets/actor_critic.hpp"

namespace conther::trainer {

inline constexpr std::string_view kVariantNames[] = {"conther_v0", "conther_v1", "td3", "td3_her", "td3_context"};

struct TrainConfig {
  // [run]
  std::string variant = "conther_v1";
  std::uint64_t seed = 1;
  std::size_t epochs = 40;
  std::size_t episodes_per_epoch = 50;
  std::size_t updates_per_epoch = 400;  // S, counted in critic updates
  /// "epoch": S updates after all episodes of an epoch. "episode": S
  /// updates (and the target update) after every episode.
  std::string update_cadence = "epoch";
  std::size_t validation_episodes = 10;

  // [td3]
  std::size_t batch_size = 64;
  double gamma = 0.98;
  double tau = 0.005;
  bool target_update_per_step = true;
  std::size_t actor_delay = 2;  // w
  double action_l2 = 1.0;       // alpha
  double noise = 0.3;           // sigma
  double actor_lr = 3e-3;
  double critic_lr = 3e-3;
  bool target_smoothing = false;
  double smoothing_noise = 0.2;
  double smoothing_clip = 0.5;

  // [replay]
  double her_fraction = 0.8;
  std::size_t context_length = 6;  // K
  std::size_t buffer_capacity = 1000;

  // [nets]
  nets::Wiring wiring = nets::Wiring::V1;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t ff_width = 64;
  std::size_t hidden = 64;

  // [env]
  std::string arm = "planar2";
  std::string task = "reach";
  std::string remote;  // host:port of a serve instance; empty = in-process

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Defaults for one of the five learners. Throws ConfigError listing the
/// valid names on anything else.
TrainConfig build_variant(std::string_view name);

struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;

  std::string qualified() const { return section + "." + name; }
};

const std::vector<ConfigKey>& config_keys();

/// Accepts "section.name" or a bare name. Throws ConfigError on unknown keys.
const ConfigKey& find_key(std::string_view key);

/// Space-separated list of every qualified key, for usage messages.
std::string valid_keys_text();

/// Builds a config from ordered (key, value) assignments: the last
/// `variant` assignment picks the base defaults, then every other
/// assignment is applied in order. Validates the result.
TrainConfig config_from_assignments(const std::vector<std::pair<std::string, std::string>>& assignments);

/// Sectioned key=value text holding every key; parses back to the same config.
std::string format_config(const TrainConfig& config);

/// Arm named by config: "planarN" (N >= 2 unit links), "spatial3" or "spatial6".
env::ArmModel make_arm(const std::string& name);
env::TaskSpec make_task(const std::string& name);
/// In-process simulator, or a RemoteEnv when `remote` is set.
std::unique_ptr<env::Environment> make_env(const TrainConfig& config);

/// Network dimensions for an environment with these observation/goal/action sizes.
nets::NetConfig net_config(const TrainConfig& config, std::size_t obs_dim, std::size_t goal_dim,
                           std::size_t action_dim);

}  // namespace conther::trainer
