#include "flydraw/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flydraw/errors.hpp"

namespace flydraw {

namespace {

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

double saturate(double x, double limit) { return std::clamp(x, -limit, limit); }

}  // namespace

void ControllerGains::validate() const {
  if (!(kp_pos.array() >= 0.0).all() || !(kd_pos.array() >= 0.0).all() ||
      kp_z_vel < 0.0 || kp_yaw < 0.0) {
    throw InvalidInput("controller gains must be >= 0");
  }
  if (!(accel_limit > 0.0) || !(cmd_saturation.max_tilt > 0.0) ||
      !(cmd_saturation.max_yaw_rate > 0.0) || !(cmd_saturation.max_zvel > 0.0)) {
    throw InvalidInput("controller saturations must be > 0");
  }
  if (!(gravity > 0.0)) throw InvalidInput("controller gravity must be > 0");
}

AttitudeCommand compute_command(const VehicleState& reference,
                                const VehicleState& current,
                                const ControllerGains& gains) {
  Vec3 a_des = gains.kp_pos.cwiseProduct(reference.p - current.p) +
               gains.kd_pos.cwiseProduct(reference.v - current.v);
  for (int i = 0; i < 3; ++i) a_des[i] = saturate(a_des[i], gains.accel_limit);

  // Rotate the horizontal demand into the heading frame, then solve for the
  // roll/pitch that point body z along (ax, ay, g).
  const double psi = current.euler.z();
  const double ax = std::cos(psi) * a_des.x() + std::sin(psi) * a_des.y();
  const double ay = -std::sin(psi) * a_des.x() + std::cos(psi) * a_des.y();
  const double g = gains.gravity;

  const CommandSaturation& sat = gains.cmd_saturation;
  AttitudeCommand cmd;
  cmd.theta_cmd = saturate(std::atan2(ax, g), sat.max_tilt);
  cmd.phi_cmd = saturate(std::atan2(-ay, std::hypot(ax, g)), sat.max_tilt);
  cmd.zvel_cmd = saturate(
      reference.v.z() + gains.kp_z_vel * (reference.p.z() - current.p.z()),
      sat.max_zvel);
  cmd.r_cmd = saturate(
      gains.kp_yaw * wrap_angle(reference.euler.z() - current.euler.z()),
      sat.max_yaw_rate);
  return cmd;
}

}  // namespace flydraw
