#include "conther/env/kinematics.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "conther/error.hpp"

namespace conther::env {

namespace {

Mat3 joint_rotation(JointAxis axis, double angle) {
  if (axis == JointAxis::Yaw) return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
  return Eigen::AngleAxisd(angle, -Vec3::UnitY()).toRotationMatrix();
}

}  // namespace

double default_gain(std::size_t joint) {
  static constexpr double kGains[] = {5.0, 4.0, 3.0, 2.0, 1.5, 1.0};
  return joint < std::size(kGains) ? kGains[joint] : kGains[std::size(kGains) - 1];
}

bool ArmModel::is_planar() const {
  return std::all_of(axes.begin(), axes.end(), [](JointAxis a) { return a == JointAxis::Yaw; });
}

double ArmModel::reach() const { return std::accumulate(link_lengths.begin(), link_lengths.end(), 0.0); }

void ArmModel::validate() const {
  const std::size_t j = joint_count();
  if (j < 2) throw ContractError("arm needs at least 2 joints, got " + std::to_string(j));
  if (link_lengths.size() != j || gains.size() != j || lower_limits.size() != j || upper_limits.size() != j ||
      home.size() != j) {
    throw ContractError("arm parameter lists must all have " + std::to_string(j) + " entries");
  }
  for (std::size_t i = 0; i < j; ++i) {
    if (!(link_lengths[i] > 0.0)) throw ContractError("link length " + std::to_string(i) + " must be positive");
    if (!(gains[i] > 0.0)) throw ContractError("joint gain " + std::to_string(i) + " must be positive");
    if (!(lower_limits[i] < upper_limits[i])) {
      throw ContractError("joint " + std::to_string(i) + " has empty limit range");
    }
    if (!(home[i] >= lower_limits[i] && home[i] <= upper_limits[i])) {
      throw ContractError("joint " + std::to_string(i) + " home angle outside its limits");
    }
  }
  if (!(dt > 0.0)) throw ContractError("dt must be positive");
}

ArmModel ArmModel::planar(std::size_t joints, double link_length) {
  ArmModel arm;
  for (std::size_t i = 0; i < joints; ++i) {
    arm.axes.push_back(JointAxis::Yaw);
    arm.link_lengths.push_back(link_length);
    arm.gains.push_back(default_gain(i));
    arm.lower_limits.push_back(-std::numbers::pi);
    arm.upper_limits.push_back(std::numbers::pi);
    arm.home.push_back(0.0);
  }
  arm.validate();
  return arm;
}

ArmModel ArmModel::spatial6() {
  ArmModel arm;
  arm.link_lengths = {0.3, 0.3, 0.2, 0.2, 0.1, 0.1};
  // Stretched out along x the tip would start 1.2 m away, well outside the goal ring.
  arm.home = {0.0, 1.5, 0.0, -2.4, 0.0, -0.6};
  for (std::size_t i = 0; i < 6; ++i) {
    arm.axes.push_back(i % 2 == 0 ? JointAxis::Yaw : JointAxis::Pitch);
    arm.gains.push_back(default_gain(i));
    arm.lower_limits.push_back(-std::numbers::pi);
    arm.upper_limits.push_back(std::numbers::pi);
  }
  arm.validate();
  return arm;
}

ArmModel ArmModel::spatial3() {
  ArmModel arm;
  arm.axes = {JointAxis::Yaw, JointAxis::Pitch, JointAxis::Pitch};
  arm.link_lengths = {0.1, 0.5, 0.5};
  arm.home = {0.0, 1.5, -2.2};
  for (std::size_t i = 0; i < 3; ++i) {
    arm.gains.push_back(default_gain(i));
    arm.lower_limits.push_back(-std::numbers::pi);
    arm.upper_limits.push_back(std::numbers::pi);
  }
  arm.validate();
  return arm;
}

Kinematics forward_kinematics(const ArmModel& model, std::span<const double> angles) {
  const std::size_t j = model.joint_count();
  if (angles.size() != j) {
    throw ContractError("forward_kinematics: expected " + std::to_string(j) + " angles, got " +
                        std::to_string(angles.size()));
  }
  Kinematics out;
  out.joint_positions.reserve(j);
  out.joint_rotations.reserve(j);
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  for (std::size_t i = 0; i < j; ++i) {
    out.joint_positions.push_back(position);
    rotation = rotation * joint_rotation(model.axes[i], angles[i]);
    out.joint_rotations.push_back(rotation);
    position += rotation.col(0) * model.link_lengths[i];
  }
  out.end_effector = position;
  return out;
}

Vec3 end_effector(const ArmModel& model, std::span<const double> angles) {
  return forward_kinematics(model, angles).end_effector;
}

}  // namespace conther::env
