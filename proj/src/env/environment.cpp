#include "conther/env/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "conther/error.hpp"

namespace conther::env {

std::vector<double> make_observation(const ArmModel& arm, std::span<const double> angles, const Vec3& goal) {
  const Kinematics kin = forward_kinematics(arm, angles);
  const ObservationLayout layout{arm.joint_count()};
  std::vector<double> obs(layout.size());
  for (std::size_t i = 0; i < arm.joint_count(); ++i) {
    const Vec3& p = kin.joint_positions[i];
    const Mat3& r = kin.joint_rotations[i];
    std::copy_n(p.data(), 3, obs.begin() + layout.position(i));
    const std::size_t o = layout.orientation(i);
    for (int c = 0; c < 2; ++c)
      for (int row = 0; row < 3; ++row) obs[o + 3 * c + row] = r(row, c);
    obs[layout.angle(i)] = angles[i];
  }
  std::copy_n(goal.data(), 3, obs.begin() + layout.goal());
  std::copy_n(kin.end_effector.data(), 3, obs.begin() + layout.end_effector());
  return obs;
}

Vec3 sample_reach_goal(const ArmModel& arm, const TaskSpec& task, std::mt19937_64& rng) {
  const double reach = arm.reach();
  const double limit = reach - task.goal_threshold;
  if (!(limit > task.region.radius_min * reach)) {
    throw ContractError("goal region lies outside the reachable workspace");
  }
  std::uniform_real_distribution<double> azimuth_dist(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> radius_dist(task.region.radius_min * reach, task.region.radius_max * reach);
  std::uniform_real_distribution<double> height_dist(task.region.height_min * reach, task.region.height_max * reach);
  for (;;) {
    const double azimuth = azimuth_dist(rng);
    const double radius = radius_dist(rng);
    const double height = arm.is_planar() ? 0.0 : height_dist(rng);
    Vec3 goal(radius * std::cos(azimuth), radius * std::sin(azimuth), height);
    if (goal.norm() <= limit) return goal;
  }
}

KinematicEnv::KinematicEnv(ArmModel arm, TaskSpec task) : arm_(std::move(arm)), task_(std::move(task)) {
  arm_.validate();
  task_.validate();
  if (task_.is_trajectory() && arm_.is_planar()) {
    throw ContractError("moving-goal tasks need a spatial arm (vertical goal motion)");
  }
  state_.angles = home_pose();
}

std::vector<double> KinematicEnv::home_pose() const { return arm_.home; }

std::vector<double> KinematicEnv::goal_vector() const {
  std::vector<double> goal(task_.goal_dim());
  std::copy_n(state_.goal.data(), 3, goal.begin());
  for (std::size_t k = 0; k < state_.obstacles.size(); ++k) {
    std::copy_n(state_.obstacles[k].data(), 3, goal.begin() + 3 + 3 * k);
  }
  return goal;
}

EnvStep KinematicEnv::snapshot(double reward, std::size_t clipped) const {
  EnvStep out;
  out.observation = make_observation(arm_, state_.angles, state_.goal);
  out.goal = goal_vector();
  const ObservationLayout layout{arm_.joint_count()};
  out.achieved_goal.assign(out.observation.begin() + layout.end_effector(),
                           out.observation.begin() + layout.end_effector() + 3);
  out.reward = reward;
  out.done = state_.step == task_.episode_length;
  out.clipped = clipped;
  return out;
}

EnvStep KinematicEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = EnvState{};
  state_.angles = home_pose();
  if (task_.is_trajectory()) {
    state_.trajectory = sample_trajectory_state(task_, rng_);
    TrajectoryPoint point = trajectory_position(task_.kind, 0.0, task_.trajectory, state_.trajectory);
    state_.goal = point.goal;
    state_.obstacles = std::move(point.obstacles);
  } else {
    state_.goal = sample_reach_goal(arm_, task_, rng_);
    for (const Vec3& offset : sample_obstacle_offsets(task_.obstacles, task_.obstacle_count, rng_)) {
      state_.obstacles.push_back(state_.goal + offset);
    }
  }
  started_ = true;
  return snapshot(0.0, 0);
}

EnvStep KinematicEnv::step(std::span<const double> action) {
  if (!started_) throw ContractError("step() before reset()");
  if (state_.step >= task_.episode_length) throw ContractError("episode finished; call reset()");
  if (action.size() != arm_.joint_count()) {
    throw ContractError("action has " + std::to_string(action.size()) + " entries, arm has " +
                        std::to_string(arm_.joint_count()) + " joints");
  }
  const std::vector<double> goal_before = goal_vector();
  const double gain_scale = task_.halve_gains ? 0.5 : 1.0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    double a = action[i];
    if (std::isnan(a)) throw ContractError("NaN action for joint " + std::to_string(i));
    if (a > 1.0 || a < -1.0) {
      a = std::clamp(a, -1.0, 1.0);
      ++clipped;
    }
    const double next = state_.angles[i] + gain_scale * arm_.gains[i] * a * arm_.dt;
    state_.angles[i] = std::clamp(next, arm_.lower_limits[i], arm_.upper_limits[i]);
  }
  ++state_.step;
  const Vec3 achieved = end_effector(arm_, state_.angles);
  const double reward = transition_reward(task_, goal_before, std::span<const double>(achieved.data(), 3));
  if (task_.is_trajectory() && state_.step % task_.update_period == 0) {
    TrajectoryPoint point =
        trajectory_position(task_.kind, static_cast<double>(state_.step), task_.trajectory, state_.trajectory);
    state_.goal = point.goal;
    state_.obstacles = std::move(point.obstacles);
  }
  return snapshot(reward, clipped);
}

}  // namespace conther::env
