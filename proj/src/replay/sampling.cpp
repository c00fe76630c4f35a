#include "conther/replay/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conther/error.hpp"

namespace conther::replay {

ContextWindow make_window(const MainBuffer& buffer, std::size_t episode, std::size_t t, std::size_t context_length) {
  const Episode& ep = buffer.episode(episode);
  if (t + 1 >= ep.size()) {
    throw ContractError("make_window: anchor " + std::to_string(t) + " has no successor in an episode of " +
                        std::to_string(ep.size()) + " steps");
  }
  ContextWindow w;
  w.episode = episode;
  w.anchor = t;
  w.steps.reserve(context_length + 1);
  w.step_indices.reserve(context_length + 1);
  for (std::size_t j = 0; j <= context_length; ++j) {
    // index t - K + j, clamped at the episode start
    const std::size_t idx = t + j >= context_length ? t + j - context_length : 0;
    w.steps.push_back(ep[idx]);
    w.step_indices.push_back(idx);
  }
  const StepRecord& next = ep[t + 1];
  w.next_obs = next.obs;
  w.next_achieved_goal = next.achieved_goal;
  w.next_goal = next.goal;
  return w;
}

SampledBatch sample_batch(const MainBuffer& buffer, std::size_t batch_size, std::size_t context_length,
                          double her_fraction, std::mt19937_64& rng) {
  if (!(her_fraction >= 0.0 && her_fraction <= 1.0)) throw ContractError("her_fraction must lie in [0, 1]");
  std::lock_guard lock(buffer.mutex());
  const std::size_t anchors = buffer.anchor_count();
  if (anchors == 0) throw NotReadyError("replay buffer has no episode with a sampleable step");

  SampledBatch batch;
  batch.windows.reserve(batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, anchors - 1);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto [e, t] = buffer.anchor_at(pick(rng));
    batch.windows.push_back(make_window(buffer, e, t, context_length));
  }

  const auto her_count = static_cast<std::size_t>(std::floor(her_fraction * static_cast<double>(batch_size)));
  if (her_count > 0) {
    std::vector<std::size_t> order(batch_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < her_count; ++i) batch.windows[order[i]].relabeled = true;
  }
  batch.her_count = her_count;
  return batch;
}

void her_relabel(ContextWindow& window) {
  if (window.next_achieved_goal.size() != 3) throw ContractError("her_relabel: window has no next achieved goal");
  for (StepRecord& s : window.steps) std::copy_n(window.next_achieved_goal.begin(), 3, s.goal.begin());
  std::copy_n(window.next_achieved_goal.begin(), 3, window.next_goal.begin());
  window.relabeled = true;
}

ObstacleGenerator env_obstacle_generator(const env::TaskSpec& task) {
  return [placement = task.obstacles, count = task.obstacle_count](std::mt19937_64& rng) {
    return env::sample_obstacle_offsets(placement, count, rng);
  };
}

void relabel_obstacles(ContextWindow& window, const ObstacleGenerator& generator, std::mt19937_64& rng) {
  if (window.steps.empty()) return;
  const std::size_t goal_dim = window.steps.back().goal.size();
  const std::size_t count = (goal_dim - 3) / 3;
  if (count == 0) return;
  const std::vector<env::Vec3> offsets = generator(rng);
  if (offsets.size() != count) throw ContractError("relabel_obstacles: generator returned the wrong obstacle count");
  auto apply = [&](std::vector<double>& goal) {
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t a = 0; a < 3; ++a) goal[3 + 3 * k + a] = goal[a] + offsets[k][static_cast<Eigen::Index>(a)];
    }
  };
  for (StepRecord& s : window.steps) apply(s.goal);
  apply(window.next_goal);
}

void compute_rewards(SampledBatch& batch, const env::TaskSpec& task) {
  for (ContextWindow& w : batch.windows) {
    w.reward = env::transition_reward(task, w.steps.back().goal, w.next_achieved_goal);
  }
}

}  // namespace conther::replay
