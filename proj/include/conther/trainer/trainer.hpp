#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "conther/env/environment.hpp"
#include "conther/nets/actor_critic.hpp"
#include "conther/ndnum/adam.hpp"
#include "conther/replay/buffer.hpp"
#include "conther/replay/sampling.hpp"
#include "conther/trainer/config.hpp"

namespace conther::trainer {

class MetricsWriter;

/// Independent seed for a named stream; splitmix64 over the three inputs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

/// Network input for one step: the observation with its goal slot
/// overwritten by the G+ of `goal` (so relabeled windows stay consistent),
/// followed by `goal`.
std::vector<double> input_row(std::span<const double> obs, std::span<const double> goal);

/// The sliding context buffer: the K+1 most recent input rows. reset()
/// fills every slot with the initial row.
class ContextBuffer {
 public:
  explicit ContextBuffer(std::size_t window) : window_(window) {}

  void reset(std::vector<double> row);
  void push(std::vector<double> row);
  /// [window, input_dim]
  nd::Tensor tensor() const;
  std::size_t window() const { return window_; }
  const std::deque<std::vector<double>>& rows() const { return rows_; }

 private:
  std::size_t window_;
  std::deque<std::vector<double>> rows_;
};

/// Maps the current context window and latest env step to an action.
using Policy = std::function<std::vector<double>(const ContextBuffer&, const env::EnvStep&)>;

Policy actor_policy(const nets::ActorNet& actor);
/// Inverse-kinematics tracker from the env module, as a policy.
Policy scripted_policy(const env::ArmModel& arm, const env::TaskSpec& task);

struct EpisodeRecord {
  /// T + 1 records: one per step plus the final state (zero action), so
  /// every one of the T transitions can anchor a window.
  replay::Episode steps;
  std::vector<double> rewards;  // T transition rewards
  std::size_t successes = 0;    // transitions with the success reward
};

/// Resets `env` with `env_seed` and runs one full episode. Actions are
/// clip(policy + N(0, sigma), -1, 1).
EpisodeRecord run_episode(const Policy& policy, env::Environment& env, std::size_t window, std::uint64_t env_seed,
                          double sigma, std::mt19937_64& rng);

struct ValidationResult {
  double mean_reward = 0.0;
  double success_rate = 0.0;  // successful transitions / all transitions
};

/// Noise-free episodes seeded derive_seed(seed_base, i). Throws
/// ContractError when episodes == 0.
ValidationResult validate(const Policy& policy, env::Environment& env, std::size_t window, std::size_t episodes,
                          std::uint64_t seed_base);

/// Online and target networks with their optimizers.
struct Learner {
  Learner(const TrainConfig& config, const nets::NetConfig& nets);

  nets::ActorNet actor;
  nets::CriticNet critic;
  nets::ActorNet actor_target;
  nets::CriticNet critic_target;
  nd::Adam actor_opt;
  nd::Adam critic_opt;

  void soft_update_targets(double tau);
};

struct BatchTensors {
  nd::Tensor windows;       // [N * (K+1), d_in]
  nd::Tensor next_windows;  // each window advanced one step
  nd::Tensor actions;       // [N, J], action taken at the anchor step
  std::vector<double> rewards;
};

BatchTensors batch_tensors(const replay::SampledBatch& batch, std::size_t window);

/// Draws N windows, relabels the marked ones (G+ and, in obstacle tasks,
/// G-) and computes their rewards.
replay::SampledBatch draw_batch(const replay::MainBuffer& buffer, const TrainConfig& config,
                                const env::TaskSpec& task, std::mt19937_64& rng);

/// y = r + gamma * min(Q1', Q2') at the next window and the target actor's
/// action there. `rng` only feeds optional target smoothing.
std::vector<double> critic_targets(const Learner& learner, const BatchTensors& batch, const TrainConfig& config,
                                   std::mt19937_64& rng);

struct UpdateResult {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  std::optional<double> actor_loss;

  double critic_loss() const { return 0.5 * (q1_loss + q2_loss); }
};

/// One critic update, plus an actor update when t % actor_delay == 0.
/// Critic parameters are frozen during the actor step. Throws NumericError
/// on a non-finite loss.
UpdateResult update_step(Learner& learner, const BatchTensors& batch, const TrainConfig& config, std::size_t t,
                         std::mt19937_64& rng);

struct UpdateMetrics {
  std::size_t epoch = 0;
  std::size_t update_idx = 0;  // 1-based over the whole run
  double critic_loss = 0.0;
  std::optional<double> actor_loss;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double mean_reward = 0.0;   // over this epoch's training transitions
  double success_rate = 0.0;  // validation
  double seconds = 0.0;       // wall clock; kept out of the metrics file
};

struct RunMetrics {
  std::vector<UpdateMetrics> updates;
  std::vector<EpochMetrics> epochs;
};

struct TrainOptions {
  MetricsWriter* metrics = nullptr;
  /// Final actor/critic checkpoints go here when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Offending batch is written here as JSON when a loss turns non-finite.
  std::optional<std::filesystem::path> failure_dir;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Full run: per epoch, collect episodes, run S updates, soft-update the
/// targets, validate. Metrics are flushed even when the run throws.
RunMetrics train(const TrainConfig& config, const TrainOptions& options = {});

}  // namespace conther::trainer
