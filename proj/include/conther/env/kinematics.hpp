#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace conther::env {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Yaw rotates about the local z axis, Pitch about the local -y axis (so a
/// positive pitch lifts the next link). Links extend along local x.
enum class JointAxis { Yaw, Pitch };

/// Serial chain driven by joint-velocity commands.
struct ArmModel {
  std::vector<JointAxis> axes;
  std::vector<double> link_lengths;  // meters
  std::vector<double> gains;         // rad/s at |action| = 1
  std::vector<double> lower_limits;  // rad
  std::vector<double> upper_limits;  // rad
  std::vector<double> home;          // rad, pose after every reset
  double dt = 0.1;                   // seconds per control step

  std::size_t joint_count() const { return axes.size(); }
  bool is_planar() const;
  double reach() const;
  /// Throws ContractError unless J >= 2, lengths > 0, gains > 0, limits ordered
  /// and the home pose inside them.
  void validate() const;

  /// Planar chain in the z = 0 plane, all joints yaw.
  static ArmModel planar(std::size_t joints, double link_length = 1.0);
  /// Six joints alternating yaw/pitch, about 1.2 m of reach. Home is a folded
  /// ready pose with the end effector at about (0.53, 0, 0.16).
  static ArmModel spatial6();
  /// Yaw, pitch, pitch: the smallest chain that reaches points in 3-D. Home
  /// puts the end effector at about (0.52, 0, 0.18).
  static ArmModel spatial3();
};

/// Default per-joint gain table, base to wrist.
double default_gain(std::size_t joint);

struct Kinematics {
  std::vector<Vec3> joint_positions;  // origin of each joint, base first
  std::vector<Mat3> joint_rotations;  // frame of each link after its joint
  Vec3 end_effector;
};

/// Terminal point and per-joint frames of the chain. Angles must have J entries.
Kinematics forward_kinematics(const ArmModel& model, std::span<const double> angles);

/// End-effector position only.
Vec3 end_effector(const ArmModel& model, std::span<const double> angles);

}  // namespace conther::env
