#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace conther::env {

enum class TaskKind { Reach, TrajSinusoid, TrajCircle, TrajSpiral };

std::string_view to_string(TaskKind kind);
/// Accepts reach, sinusoid, circle, spiral. Throws ConfigError otherwise.
TaskKind parse_task_kind(std::string_view name);

/// Reach goals: annulus around the base, as fractions of arm reach.
struct GoalRegion {
  double radius_min = 0.4;
  double radius_max = 0.9;
  double height_min = 0.05;
  double height_max = 0.35;
};

/// Obstacle offsets relative to G+: uniform height band above the goal plus
/// uniform horizontal jitter in [-jitter, jitter] per axis.
struct ObstaclePlacement {
  double height_min = 0.1;
  double height_max = 0.2;
  double jitter = 0.05;
};

/// Shape parameters of the moving-goal tasks. Lengths in meters, periods in
/// control steps.
struct TrajectoryParams {
  double center_radius_min = 0.45;
  double center_radius_max = 0.65;
  double center_height_min = 0.15;
  double center_height_max = 0.30;

  double sine_amplitude_min = 0.02;
  double sine_amplitude_max = 0.04;
  double sine_period = 24.0;
  double sine_travel_speed = 0.008;

  double circle_radius_min = 0.08;
  double circle_radius_max = 0.14;
  double circle_radius_step = 0.03;
  double circle_period = 36.0;

  double spiral_radius_min = 0.06;
  double spiral_radius_max = 0.10;
  double spiral_radius_step = 0.03;
  double spiral_period = 24.0;
  double spiral_height = 0.15;
  double spiral_traversal = 25.0;
  double obstacle_bob_amplitude = 0.03;
  double obstacle_bob_period = 12.0;

  double obstacle_orbit_radius = 0.02;
  double obstacle_orbit_period = 12.0;
};

struct TaskSpec {
  TaskKind kind = TaskKind::Reach;
  double goal_threshold = 0.1;
  double obstacle_threshold = 0.05;
  std::size_t obstacle_count = 0;
  /// Goal/obstacle positions refresh every this many steps in moving tasks.
  std::size_t update_period = 3;
  std::size_t episode_length = 50;
  /// Halves every joint gain.
  bool halve_gains = false;
  GoalRegion region;
  ObstaclePlacement obstacles;
  TrajectoryParams trajectory;

  bool has_obstacles() const { return obstacle_count > 0; }
  bool is_trajectory() const { return kind != TaskKind::Reach; }
  /// G+ followed by one point per obstacle.
  std::size_t goal_dim() const { return 3 + 3 * obstacle_count; }
  void validate() const;

  /// Point reaching with the sparse 0/-1 reward, threshold 0.1.
  static TaskSpec reach();
  /// Moving goal with three obstacles, thresholds 0.09 / 0.05, halved gains.
  static TaskSpec trajectory_task(TaskKind kind, std::size_t context_length = 6);
};

/// ceil(K / 2), at least 1.
std::size_t update_period_for(std::size_t context_length);

inline constexpr double kSuccessReward = 0.0;

/// 0 if d_goal <= threshold, else -1.
double reward_reach(double d_goal, double threshold);

/// 0.5 * (r_goal + r_obst) with r_goal = 0 iff d_goal <= d_g and r_obst = 0
/// iff every obstacle distance >= d_o.
double reward_obstacle_task(double d_goal, std::span<const double> obstacle_distances, double d_g,
                            double d_o);

/// Reward of a transition whose goal vector is `goal` (G+ then G- points)
/// and whose resulting end-effector point is `achieved`.
double transition_reward(const TaskSpec& task, std::span<const double> goal, std::span<const double> achieved);

}  // namespace conther::env
