#pragma once

#include "flydraw/sim.hpp"
#include "flydraw/state.hpp"

namespace flydraw {

inline constexpr double kControllerRate = 70.0;
inline constexpr int kPlantStepsPerControl = 3;  // 210 Hz / 70 Hz

struct CommandSaturation {
  double max_tilt = 0.5;      // rad, applies to phi_cmd and theta_cmd
  double max_yaw_rate = 1.0;  // rad/s
  double max_zvel = 1.5;      // m/s
};

// Off-board PD gains, tuned once for a well damped but lagging response.
// They never change between experiments.
struct ControllerGains {
  Vec3 kp_pos = Vec3(3.0, 3.0, 3.0);  // 1/s^2
  Vec3 kd_pos = Vec3(2.5, 2.5, 2.5);  // 1/s
  double kp_z_vel = 1.5;              // 1/s
  double kp_yaw = 1.0;                // 1/s
  double accel_limit = 4.0;           // m/s^2, per axis
  double gravity = 9.81;              // used by the thrust-direction inversion
  CommandSaturation cmd_saturation;

  void validate() const;
};

// Nonlinear transform + PD law. Pure: output depends only on the arguments.
AttitudeCommand compute_command(const VehicleState& reference,
                                const VehicleState& current,
                                const ControllerGains& gains);

}  // namespace flydraw
