#pragma once

#include <array>
#include <Eigen/Core>
#include <Eigen/Geometry>

namespace flydraw {

using Vec3 = Eigen::Vector3d;

// Full vehicle state {x,y,z, vx,vy,vz, phi,theta,psi, p,q,r, zacc}.
// Used for the current, desired and reference roles alike.
struct VehicleState {
  Vec3 p = Vec3::Zero();      // position, world frame (m)
  Vec3 v = Vec3::Zero();      // velocity, world frame (m/s)
  Vec3 euler = Vec3::Zero();  // roll, pitch, yaw (rad), ZYX convention
  Vec3 omega = Vec3::Zero();  // body rates p, q, r (rad/s)
  double zacc = 0.0;          // vertical acceleration (m/s^2)

  static constexpr int kSize = 13;

  std::array<double, kSize> to_array() const;
  static VehicleState from_array(const std::array<double, kSize>& a);

  bool finite() const;
  bool operator==(const VehicleState& o) const;
  bool operator!=(const VehicleState& o) const { return !(*this == o); }
};

}  // namespace flydraw
