#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <random>

#include "flydraw/state.hpp"

namespace flydraw {

// Inner-loop rate. Nests exactly 3:1 into the 70 Hz controller.
inline constexpr double kPlantRate = 210.0;
inline constexpr double kPlantDt = 1.0 / kPlantRate;

struct ThrustLimits {
  double min = 0.0;  // N, per motor
  double max = 2.5;
};

// Gains of the on-board attitude/rate/climb-rate loops.
struct OnboardGains {
  double k_att = 8.0;        // attitude error -> rate setpoint (1/s)
  double k_rate = 25.0;      // roll/pitch rate error -> angular accel (1/s)
  double k_yaw_rate = 10.0;  // yaw rate error -> angular accel (1/s)
  double k_zvel = 4.0;       // climb-rate error -> vertical accel (1/s)
};

// Physical parameters plus the hidden non-idealities (delay, drag, motor lag).
struct PlantConfig {
  double mass = 0.5;
  Vec3 inertia = Vec3(2.2e-3, 2.9e-3, 5.3e-3);
  double arm_length = 0.18;
  double yaw_moment_coeff = 0.016;  // rotor drag torque per unit thrust (m)
  double gravity = 9.81;
  Vec3 drag_coeff = Vec3(0.3, 0.3, 0.4);  // linear drag (N s/m)
  double motor_time_constant = 0.05;      // s
  int command_delay_steps = 6;            // inner steps
  ThrustLimits thrust_limits;
  OnboardGains onboard;

  // Throws InvalidInput if any invariant fails.
  void validate() const;
};

struct MotorThrusts {
  std::array<double, 4> f{};  // plus layout: +x, +y, -x, -y arms
};

struct AttitudeCommand {
  double phi_cmd = 0.0;
  double theta_cmd = 0.0;
  double r_cmd = 0.0;
  double zvel_cmd = 0.0;

  bool operator==(const AttitudeCommand&) const = default;
};

MotorThrusts hover_thrusts(const PlantConfig& cfg);

// Advances the rigid body by dt with RK4, thrusts held constant.
// external_force is a world-frame disturbance force (N).
// Throws SimulationDiverged when the tilt guard (80 deg) trips or the
// state goes non-finite.
VehicleState step_plant(const VehicleState& state, const MotorThrusts& thrusts,
                        const PlantConfig& cfg, double dt,
                        const Vec3& external_force = Vec3::Zero());

// 200 Hz-class on-board controller: P attitude -> P rate loops for roll and
// pitch, P yaw rate, and collective thrust from climb-rate tracking.
MotorThrusts onboard_control(const VehicleState& state,
                             const AttitudeCommand& cmd,
                             const PlantConfig& cfg);

// FIFO of outer-loop commands. Returns the command pushed `delay` calls ago,
// or a hover (all-zero) command until the buffer has filled.
class CommandDelay {
public:
  explicit CommandDelay(int delay_steps);

  AttitudeCommand push(const AttitudeCommand& cmd);
  int delay() const { return delay_; }

private:
  int delay_;
  std::deque<AttitudeCommand> queue_;
};

// Seeded disturbances. The pulse is a fixed-magnitude horizontal force held
// for pulse_duration, starting near mid-trajectory; wind is an
// Ornstein-Uhlenbeck force process per horizontal axis.
struct DisturbanceConfig {
  bool pulse = false;
  double pulse_force = 0.5;     // N
  double pulse_duration = 1.0;  // s
  double wind_std = 0.0;        // N, stationary std of the OU force
  double wind_tau = 1.5;        // s, OU correlation time

  bool operator==(const DisturbanceConfig&) const = default;
};

class Disturbance {
public:
  Disturbance(const DisturbanceConfig& cfg, std::uint64_t seed,
              double flight_duration);

  // Force to apply over the next inner step starting at time t.
  Vec3 next(double t, double dt);

  double pulse_start() const { return pulse_start_; }
  const Vec3& pulse_direction() const { return pulse_dir_; }

private:
  DisturbanceConfig cfg_;
  std::mt19937_64 rng_;
  double pulse_start_ = 0.0;
  Vec3 pulse_dir_ = Vec3::UnitX();
  Vec3 wind_ = Vec3::Zero();
};

// One simulated vehicle: delay buffer -> on-board controller -> motor lag ->
// rigid body, stepped at kPlantRate.
class Quadrotor {
public:
  Quadrotor(const PlantConfig& cfg, const VehicleState& initial,
            const DisturbanceConfig& dist = {}, std::uint64_t seed = 0,
            double flight_duration = 0.0);

  // One inner step with the latest outer-loop command.
  void step(const AttitudeCommand& cmd);

  const VehicleState& state() const { return state_; }
  const MotorThrusts& motors() const { return motors_; }
  double time() const { return static_cast<double>(steps_) * kPlantDt; }
  long steps() const { return steps_; }

private:
  PlantConfig cfg_;
  VehicleState state_;
  MotorThrusts motors_;
  CommandDelay delay_;
  Disturbance disturbance_;
  double lag_alpha_;
  long steps_ = 0;
};

}  // namespace flydraw
