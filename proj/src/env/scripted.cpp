#include "conther/env/scripted.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "conther/env/environment.hpp"
#include "conther/error.hpp"

namespace conther::env {

std::vector<double> solve_ik(const ArmModel& arm, std::span<const double> start, const Vec3& target,
                             int iterations, double damping) {
  const std::size_t j = arm.joint_count();
  std::vector<double> angles(start.begin(), start.end());
  Eigen::MatrixXd jac(3, static_cast<Eigen::Index>(j));
  for (int it = 0; it < iterations; ++it) {
    const Kinematics kin = forward_kinematics(arm, angles);
    const Vec3 err = target - kin.end_effector;
    if (err.norm() < 1e-6) break;
    for (std::size_t i = 0; i < j; ++i) {
      const Vec3 axis = arm.axes[i] == JointAxis::Yaw ? Vec3(kin.joint_rotations[i].col(2))
                                                      : Vec3(-kin.joint_rotations[i].col(1));
      jac.col(static_cast<Eigen::Index>(i)) = axis.cross(kin.end_effector - kin.joint_positions[i]);
    }
    const Mat3 jjt = jac * jac.transpose() + damping * damping * Mat3::Identity();
    Eigen::VectorXd delta = jac.transpose() * jjt.ldlt().solve(err);
    const double largest = delta.cwiseAbs().maxCoeff();
    if (largest > 0.5) delta *= 0.5 / largest;
    for (std::size_t i = 0; i < j; ++i) {
      angles[i] = std::clamp(angles[i] + delta(static_cast<Eigen::Index>(i)), arm.lower_limits[i],
                             arm.upper_limits[i]);
    }
  }
  return angles;
}

std::vector<double> tracking_action(const ArmModel& arm, const TaskSpec& task, std::span<const double> observation,
                                    std::span<const double> goal) {
  const ObservationLayout layout{arm.joint_count()};
  if (observation.size() != layout.size() || goal.size() != task.goal_dim()) {
    throw ContractError("tracking_action: observation/goal sizes do not match arm and task");
  }
  std::vector<double> angles(arm.joint_count());
  for (std::size_t i = 0; i < arm.joint_count(); ++i) angles[i] = observation[layout.angle(i)];
  Vec3 target(goal[0], goal[1], goal[2]);
  if (task.has_obstacles()) target.z() -= kTrackerClearance;

  const std::vector<double> solution = solve_ik(arm, angles, target);
  const double gain_scale = task.halve_gains ? 0.5 : 1.0;
  std::vector<double> action(arm.joint_count());
  double largest = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    action[i] = (solution[i] - angles[i]) / (gain_scale * arm.gains[i] * arm.dt);
    largest = std::max(largest, std::abs(action[i]));
  }
  if (largest > 1.0) {
    for (double& a : action) a /= largest;
  }
  return action;
}

}  // namespace conther::env
