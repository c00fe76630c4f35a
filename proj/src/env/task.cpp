#include "conther/env/task.hpp"

#include <cmath>
#include <vector>

#include "conther/error.hpp"

namespace conther::env {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Reach:
      return "reach";
    case TaskKind::TrajSinusoid:
      return "sinusoid";
    case TaskKind::TrajCircle:
      return "circle";
    case TaskKind::TrajSpiral:
      return "spiral";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "reach") return TaskKind::Reach;
  if (name == "sinusoid") return TaskKind::TrajSinusoid;
  if (name == "circle") return TaskKind::TrajCircle;
  if (name == "spiral") return TaskKind::TrajSpiral;
  throw ConfigError("unknown task '" + std::string(name) + "' (valid: reach, sinusoid, circle, spiral)");
}

void TaskSpec::validate() const {
  if (!(goal_threshold > 0.0)) throw ContractError("goal threshold must be positive");
  if (has_obstacles() && !(obstacle_threshold > 0.0)) throw ContractError("obstacle threshold must be positive");
  if (update_period < 1) throw ContractError("update period must be at least 1");
  if (episode_length < 2) throw ContractError("episode length must be at least 2");
  if (region.radius_min > region.radius_max || region.height_min > region.height_max) {
    throw ContractError("goal region bounds are inverted");
  }
  if (obstacles.height_min > obstacles.height_max || obstacles.jitter < 0.0) {
    throw ContractError("obstacle placement bounds are invalid");
  }
}

TaskSpec TaskSpec::reach() { return TaskSpec{}; }

TaskSpec TaskSpec::trajectory_task(TaskKind kind, std::size_t context_length) {
  if (kind == TaskKind::Reach) throw ContractError("trajectory_task needs a moving-goal kind");
  TaskSpec task;
  task.kind = kind;
  task.goal_threshold = 0.09;
  task.obstacle_threshold = 0.05;
  task.obstacle_count = 3;
  task.update_period = update_period_for(context_length);
  task.halve_gains = true;
  return task;
}

std::size_t update_period_for(std::size_t context_length) {
  const std::size_t half = (context_length + 1) / 2;
  return half < 1 ? 1 : half;
}

double reward_reach(double d_goal, double threshold) { return d_goal <= threshold ? 0.0 : -1.0; }

double reward_obstacle_task(double d_goal, std::span<const double> obstacle_distances, double d_g,
                            double d_o) {
  const double r_goal = d_goal <= d_g ? 0.0 : -1.0;
  double r_obst = 0.0;
  for (double d : obstacle_distances) {
    if (!(d >= d_o)) r_obst = -1.0;
  }
  return 0.5 * (r_goal + r_obst);
}

namespace {
double distance3(std::span<const double> a, std::span<const double> b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}
}  // namespace

double transition_reward(const TaskSpec& task, std::span<const double> goal, std::span<const double> achieved) {
  if (goal.size() != task.goal_dim() || achieved.size() != 3) {
    throw ContractError("transition_reward: expected goal of " + std::to_string(task.goal_dim()) +
                        " values and a 3-d achieved goal");
  }
  const double d_goal = distance3(goal.subspan(0, 3), achieved);
  if (!task.has_obstacles()) return reward_reach(d_goal, task.goal_threshold);
  std::vector<double> ds(task.obstacle_count);
  for (std::size_t k = 0; k < task.obstacle_count; ++k) ds[k] = distance3(goal.subspan(3 + 3 * k, 3), achieved);
  return reward_obstacle_task(d_goal, ds, task.goal_threshold, task.obstacle_threshold);
}

}  // namespace conther::env
