#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "conther/env/kinematics.hpp"
#include "conther/env/task.hpp"
#include "conther/env/trajectory.hpp"

namespace conther::env {

/// Field offsets inside an observation vector. Per joint, in joint order:
/// joint origin (3), first two columns of the link frame (6), joint angle
/// (1); then G+ (3) and end effector (3), both in the base frame.
struct ObservationLayout {
  std::size_t joints = 0;

  static constexpr std::size_t kPerJoint = 10;
  std::size_t size() const { return joints * kPerJoint + 6; }
  std::size_t position(std::size_t joint) const { return joint * kPerJoint; }
  std::size_t orientation(std::size_t joint) const { return joint * kPerJoint + 3; }
  std::size_t angle(std::size_t joint) const { return joint * kPerJoint + 9; }
  std::size_t goal() const { return joints * kPerJoint; }
  std::size_t end_effector() const { return joints * kPerJoint + 3; }
};

/// Result of reset() and step(). `reward` scores the transition just taken
/// (achieved goal after the action against the goal in force before it); it
/// is 0 after reset.
struct EnvStep {
  std::vector<double> observation;
  std::vector<double> goal;
  std::vector<double> achieved_goal;
  double reward = 0.0;
  bool done = false;
  std::size_t clipped = 0;  // action coordinates clipped to [-1, 1]
};

/// Reset/step interface shared by the in-process simulator and the wire client.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual EnvStep reset(std::uint64_t seed) = 0;
  virtual EnvStep step(std::span<const double> action) = 0;
  virtual const ArmModel& arm() const = 0;
  virtual const TaskSpec& task() const = 0;

  std::size_t observation_dim() const { return ObservationLayout{arm().joint_count()}.size(); }
  std::size_t goal_dim() const { return task().goal_dim(); }
  std::size_t action_dim() const { return arm().joint_count(); }
};

struct EnvState {
  std::vector<double> angles;
  Vec3 goal = Vec3::Zero();
  std::vector<Vec3> obstacles;
  std::size_t step = 0;
  TrajectoryState trajectory;
};

/// Pure-kinematics arm: joint angles integrate gain * action * dt, clamped to
/// limits. Collisions are measured through the reward, never simulated.
class KinematicEnv final : public Environment {
 public:
  KinematicEnv(ArmModel arm, TaskSpec task);

  EnvStep reset(std::uint64_t seed) override;
  EnvStep step(std::span<const double> action) override;
  const ArmModel& arm() const override { return arm_; }
  const TaskSpec& task() const override { return task_; }
  const EnvState& state() const { return state_; }

  /// Angles every episode starts from (straight arm along +x).
  std::vector<double> home_pose() const;

 private:
  EnvStep snapshot(double reward, std::size_t clipped) const;
  std::vector<double> goal_vector() const;

  ArmModel arm_;
  TaskSpec task_;
  EnvState state_;
  std::mt19937_64 rng_;
  bool started_ = false;
};

/// Reach goal sampler: azimuth uniform, radius and height uniform in the
/// region scaled by reach (planar arms get height 0), resampled until
/// |goal| <= reach - goal_threshold.
Vec3 sample_reach_goal(const ArmModel& arm, const TaskSpec& task, std::mt19937_64& rng);

std::vector<double> make_observation(const ArmModel& arm, std::span<const double> angles, const Vec3& goal);

}  // namespace conther::env
