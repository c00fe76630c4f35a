#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "conther/env/kinematics.hpp"
#include "conther/env/task.hpp"

namespace conther::env {

/// Per-episode random draws that, with the task parameters, fix a whole
/// goal/obstacle schedule.
struct TrajectoryState {
  Vec3 center = Vec3::Zero();      // path anchor; lowest point for the spiral
  Vec3 direction = Vec3::UnitX();  // horizontal travel direction (sinusoid)
  double size = 0.0;               // sine amplitude, or base radius of circle/spiral
  std::vector<Vec3> obstacle_offsets;
};

struct TrajectoryPoint {
  Vec3 goal;
  std::vector<Vec3> obstacles;
};

/// Obstacle offsets relative to G+, drawn from the placement distribution.
/// Replay relabeling draws from this same function.
std::vector<Vec3> sample_obstacle_offsets(const ObstaclePlacement& placement, std::size_t count,
                                          std::mt19937_64& rng);

TrajectoryState sample_trajectory_state(const TaskSpec& task, std::mt19937_64& rng);

/// Goal and obstacle positions at continuous step time t.
///
/// Sinusoid: the goal travels horizontally along `direction` while bobbing
/// vertically by size * sin(2 pi t / period); obstacles bob the opposite way.
/// Circle: horizontal circle whose radius grows by a fixed step after every
/// full lap; obstacles follow the goal. Spiral: helix climbing then
/// descending, radius growing after every traversal; obstacles follow with
/// an extra vertical bob. All obstacles also orbit their own axis on a small
/// circle starting at phase zero, so at t = 0 they sit at goal + offset.
TrajectoryPoint trajectory_position(TaskKind kind, double t, const TrajectoryParams& params,
                                    const TrajectoryState& state);

}  // namespace conther::env
