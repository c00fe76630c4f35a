#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "conther/env/task.hpp"
#include "conther/env/trajectory.hpp"
#include "conther/replay/buffer.hpp"

namespace conther::replay {

/// K+1 consecutive steps of one episode ending at the anchor step, plus the
/// values of the step after the anchor. Anchors earlier than K are padded at
/// the front by repeating step 0.
struct ContextWindow {
  std::vector<StepRecord> steps;
  std::vector<std::size_t> step_indices;  // episode-relative index of each step
  std::size_t episode = 0;                // buffer age index at sampling time
  std::size_t anchor = 0;
  std::vector<double> next_obs;
  std::vector<double> next_achieved_goal;
  /// Goal in force at the next step; the last row of the shifted window.
  std::vector<double> next_goal;
  bool relabeled = false;
  double reward = 0.0;
};

struct SampledBatch {
  std::vector<ContextWindow> windows;
  std::size_t her_count = 0;
};

/// Window anchored at step t of the given episode. Requires t <= T - 2.
ContextWindow make_window(const MainBuffer& buffer, std::size_t episode, std::size_t t, std::size_t context_length);

/// N windows with anchors uniform over every (episode, t <= T-2) pair, then
/// floor(her_fraction * N) of them, chosen uniformly without replacement,
/// marked relabeled. Marking only; call her_relabel() to rewrite goals.
/// Throws NotReadyError when no anchor exists.
SampledBatch sample_batch(const MainBuffer& buffer, std::size_t batch_size, std::size_t context_length,
                          double her_fraction, std::mt19937_64& rng);

/// Rewrites the G+ part of every step goal (and of next_goal) to the final
/// step's next achieved goal. The reaching distance of the last transition
/// becomes exactly 0.
void her_relabel(ContextWindow& window);

/// Draws obstacle offsets relative to G+.
using ObstacleGenerator = std::function<std::vector<env::Vec3>(std::mt19937_64&)>;

/// Generator matching the environment's own obstacle placement.
ObstacleGenerator env_obstacle_generator(const env::TaskSpec& task);

/// Recomputes every G- point around the relabeled G+ with one draw per
/// window, shared by all steps of that window.
void relabel_obstacles(ContextWindow& window, const ObstacleGenerator& generator, std::mt19937_64& rng);

/// Fills window.reward from the task reward of the final transition:
/// final step goal against next achieved goal.
void compute_rewards(SampledBatch& batch, const env::TaskSpec& task);

}  // namespace conther::replay
