#pragma once

#include <span>
#include <vector>

#include "conther/env/kinematics.hpp"
#include "conther/env/task.hpp"

namespace conther::env {

/// How far below G+ the tracker aims in obstacle tasks; keeps the gripper
/// point inside the goal ball while staying clear of obstacles above it.
inline constexpr double kTrackerClearance = 0.04;

/// Damped least-squares inverse kinematics started from `start`. Returns
/// angles within limits; converges to the nearest local solution.
std::vector<double> solve_ik(const ArmModel& arm, std::span<const double> start, const Vec3& target,
                             int iterations = 100, double damping = 0.05);

/// Scripted tracking policy that reads joint angles and G+ from the
/// observation/goal pair and returns the action moving toward the IK
/// solution as fast as the joint gains allow (uniformly scaled into [-1, 1]).
std::vector<double> tracking_action(const ArmModel& arm, const TaskSpec& task, std::span<const double> observation,
                                    std::span<const double> goal);

}  // namespace conther::env
