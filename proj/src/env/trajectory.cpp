#include "conther/env/trajectory.hpp"

#include <cmath>
#include <numbers>

#include "conther/error.hpp"

namespace conther::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 orbit(const TrajectoryParams& p, double t, std::size_t k, std::size_t count) {
  const double phase0 = kTwoPi * static_cast<double>(k) / static_cast<double>(count);
  const double phase = phase0 + kTwoPi * t / p.obstacle_orbit_period;
  return p.obstacle_orbit_radius *
         Vec3(std::cos(phase) - std::cos(phase0), std::sin(phase) - std::sin(phase0), 0.0);
}

}  // namespace

std::vector<Vec3> sample_obstacle_offsets(const ObstaclePlacement& placement, std::size_t count,
                                          std::mt19937_64& rng) {
  std::vector<Vec3> offsets;
  offsets.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double x = uniform(rng, -placement.jitter, placement.jitter);
    const double y = uniform(rng, -placement.jitter, placement.jitter);
    const double z = uniform(rng, placement.height_min, placement.height_max);
    offsets.emplace_back(x, y, z);
  }
  return offsets;
}

TrajectoryState sample_trajectory_state(const TaskSpec& task, std::mt19937_64& rng) {
  const auto& p = task.trajectory;
  TrajectoryState state;
  const double azimuth = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double radius = uniform(rng, p.center_radius_min, p.center_radius_max);
  const double height = uniform(rng, p.center_height_min, p.center_height_max);
  state.center = Vec3(radius * std::cos(azimuth), radius * std::sin(azimuth), height);
  // tangent to the circle around the base, so travel keeps the reach roughly constant
  state.direction = Vec3(-std::sin(azimuth), std::cos(azimuth), 0.0);
  switch (task.kind) {
    case TaskKind::TrajSinusoid:
      state.size = uniform(rng, p.sine_amplitude_min, p.sine_amplitude_max);
      break;
    case TaskKind::TrajCircle:
      state.size = uniform(rng, p.circle_radius_min, p.circle_radius_max);
      break;
    case TaskKind::TrajSpiral:
      state.size = uniform(rng, p.spiral_radius_min, p.spiral_radius_max);
      break;
    case TaskKind::Reach:
      throw ContractError("sample_trajectory_state: reach task has no trajectory");
  }
  state.obstacle_offsets = sample_obstacle_offsets(task.obstacles, task.obstacle_count, rng);
  return state;
}

TrajectoryPoint trajectory_position(TaskKind kind, double t, const TrajectoryParams& p,
                                    const TrajectoryState& state) {
  TrajectoryPoint out;
  const std::size_t count = state.obstacle_offsets.size();
  Vec3 obstacle_shift = Vec3::Zero();
  switch (kind) {
    case TaskKind::TrajSinusoid: {
      const double bob = state.size * std::sin(kTwoPi * t / p.sine_period);
      const Vec3 path = state.center + state.direction * (p.sine_travel_speed * t);
      out.goal = path + Vec3(0.0, 0.0, bob);
      // obstacles are anchored on the undisplaced path and bob the other way
      obstacle_shift = Vec3(0.0, 0.0, -2.0 * bob);
      break;
    }
    case TaskKind::TrajCircle: {
      const double laps = std::floor(t / p.circle_period);
      const double radius = state.size + laps * p.circle_radius_step;
      const double angle = kTwoPi * t / p.circle_period;
      out.goal = state.center + radius * Vec3(std::cos(angle), std::sin(angle), 0.0);
      break;
    }
    case TaskKind::TrajSpiral: {
      const double traversals = std::floor(t / p.spiral_traversal);
      const double frac = t / p.spiral_traversal - traversals;
      const bool climbing = static_cast<long long>(traversals) % 2 == 0;
      const double lift = p.spiral_height * (climbing ? frac : 1.0 - frac);
      const double radius = state.size + traversals * p.spiral_radius_step;
      const double angle = kTwoPi * t / p.spiral_period;
      out.goal = state.center + Vec3(radius * std::cos(angle), radius * std::sin(angle), lift);
      obstacle_shift = Vec3(0.0, 0.0, p.obstacle_bob_amplitude * std::sin(kTwoPi * t / p.obstacle_bob_period));
      break;
    }
    case TaskKind::Reach:
      throw ContractError("trajectory_position: reach task has no trajectory");
  }
  out.obstacles.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.obstacles.push_back(out.goal + state.obstacle_offsets[k] + obstacle_shift + orbit(p, t, k, count));
  }
  return out;
}

}  // namespace conther::env
