#include "flydraw/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "flydraw/errors.hpp"

namespace flydraw {

namespace {

constexpr double kTiltGuard = 80.0 * std::numbers::pi / 180.0;

// Rigid-body part of the state that RK4 integrates.
struct Rigid {
  Vec3 p, v, euler, omega;

  Rigid operator+(const Rigid& o) const {
    return {p + o.p, v + o.v, euler + o.euler, omega + o.omega};
  }
  Rigid operator*(double k) const {
    return {p * k, v * k, euler * k, omega * k};
  }
};

struct Wrench {
  double thrust;
  Vec3 torque;
};

Wrench mix_forward(const MotorThrusts& m, const PlantConfig& cfg) {
  const auto& f = m.f;
  const double l = cfg.arm_length;
  const double c = cfg.yaw_moment_coeff;
  return {f[0] + f[1] + f[2] + f[3],
          Vec3(l * (f[1] - f[3]), l * (f[2] - f[0]),
               c * (f[0] - f[1] + f[2] - f[3]))};
}

MotorThrusts mix_inverse(double thrust, const Vec3& torque,
                         const PlantConfig& cfg) {
  const double l2 = 2.0 * cfg.arm_length;
  const double c4 = 4.0 * cfg.yaw_moment_coeff;
  const double q = thrust / 4.0;
  MotorThrusts m;
  m.f[0] = q - torque.y() / l2 + torque.z() / c4;
  m.f[1] = q + torque.x() / l2 - torque.z() / c4;
  m.f[2] = q + torque.y() / l2 + torque.z() / c4;
  m.f[3] = q - torque.x() / l2 - torque.z() / c4;
  return m;
}

// World-frame direction of the body z axis for ZYX Euler angles.
Vec3 body_z(const Vec3& euler) {
  const double cphi = std::cos(euler.x()), sphi = std::sin(euler.x());
  const double cth = std::cos(euler.y()), sth = std::sin(euler.y());
  const double cpsi = std::cos(euler.z()), spsi = std::sin(euler.z());
  return {cpsi * sth * cphi + spsi * sphi, spsi * sth * cphi - cpsi * sphi,
          cth * cphi};
}

Rigid derivative(const Rigid& s, const Wrench& w, const PlantConfig& cfg,
                 const Vec3& f_ext) {
  Rigid d;
  d.p = s.v;
  const Vec3 force =
      body_z(s.euler) * w.thrust + f_ext - cfg.drag_coeff.cwiseProduct(s.v);
  d.v = force / cfg.mass - Vec3(0.0, 0.0, cfg.gravity);

  const double phi = s.euler.x(), th = s.euler.y();
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(th), tth = std::tan(th);
  const Vec3& om = s.omega;
  d.euler = Vec3(om.x() + sphi * tth * om.y() + cphi * tth * om.z(),
                 cphi * om.y() - sphi * om.z(),
                 (sphi * om.y() + cphi * om.z()) / cth);

  const Vec3 iw = cfg.inertia.cwiseProduct(om);
  d.omega = (w.torque - om.cross(iw)).cwiseQuotient(cfg.inertia);
  return d;
}

}  // namespace

void PlantConfig::validate() const {
  if (!(mass > 0.0)) throw InvalidInput("plant mass must be > 0");
  if (!(inertia.array() > 0.0).all())
    throw InvalidInput("plant inertia components must be > 0");
  if (!(arm_length > 0.0)) throw InvalidInput("arm_length must be > 0");
  if (!(yaw_moment_coeff > 0.0))
    throw InvalidInput("yaw_moment_coeff must be > 0");
  if (command_delay_steps < 0)
    throw InvalidInput("command_delay_steps must be >= 0");
  if (!(motor_time_constant >= 0.0))
    throw InvalidInput("motor_time_constant must be >= 0");
  if (!(thrust_limits.max > thrust_limits.min))
    throw InvalidInput("thrust_limits.max must exceed thrust_limits.min");
  if (!(drag_coeff.array() >= 0.0).all())
    throw InvalidInput("drag_coeff components must be >= 0");
}

MotorThrusts hover_thrusts(const PlantConfig& cfg) {
  MotorThrusts m;
  m.f.fill(cfg.mass * cfg.gravity / 4.0);
  return m;
}

VehicleState step_plant(const VehicleState& state, const MotorThrusts& thrusts,
                        const PlantConfig& cfg, double dt,
                        const Vec3& external_force) {
  if (!(dt > 0.0)) throw InvalidInput("step_plant: dt must be > 0");
  const Wrench w = mix_forward(thrusts, cfg);
  const Rigid s0{state.p, state.v, state.euler, state.omega};

  const Rigid k1 = derivative(s0, w, cfg, external_force);
  const Rigid k2 = derivative(s0 + k1 * (dt / 2.0), w, cfg, external_force);
  const Rigid k3 = derivative(s0 + k2 * (dt / 2.0), w, cfg, external_force);
  const Rigid k4 = derivative(s0 + k3 * dt, w, cfg, external_force);
  const Rigid s1 = s0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

  VehicleState out;
  out.p = s1.p;
  out.v = s1.v;
  out.euler = s1.euler;
  out.omega = s1.omega;
  out.zacc = derivative(s1, w, cfg, external_force).v.z();

  if (!out.finite()) throw SimulationDiverged("non-finite vehicle state");
  if (std::abs(out.euler.x()) >= kTiltGuard ||
      std::abs(out.euler.y()) >= kTiltGuard) {
    throw SimulationDiverged("tilt guard violated (|roll| or |pitch| >= 80 deg)");
  }
  return out;
}

MotorThrusts onboard_control(const VehicleState& state,
                             const AttitudeCommand& cmd,
                             const PlantConfig& cfg) {
  const OnboardGains& g = cfg.onboard;
  const Vec3 rate_sp(g.k_att * (cmd.phi_cmd - state.euler.x()),
                     g.k_att * (cmd.theta_cmd - state.euler.y()), cmd.r_cmd);
  const Vec3 rate_err = rate_sp - state.omega;
  const Vec3 ang_acc(g.k_rate * rate_err.x(), g.k_rate * rate_err.y(),
                     g.k_yaw_rate * rate_err.z());
  const Vec3 torque = cfg.inertia.cwiseProduct(ang_acc);

  const double tilt = std::cos(state.euler.x()) * std::cos(state.euler.y());
  const double thrust =
      cfg.mass * (cfg.gravity + g.k_zvel * (cmd.zvel_cmd - state.v.z())) / tilt;

  MotorThrusts m = mix_inverse(thrust, torque, cfg);
  for (double& f : m.f)
    f = std::clamp(f, cfg.thrust_limits.min, cfg.thrust_limits.max);
  return m;
}

CommandDelay::CommandDelay(int delay_steps) : delay_(delay_steps) {
  if (delay_steps < 0) throw InvalidInput("command delay must be >= 0");
}

AttitudeCommand CommandDelay::push(const AttitudeCommand& cmd) {
  if (delay_ == 0) return cmd;
  queue_.push_back(cmd);
  if (static_cast<int>(queue_.size()) <= delay_) return AttitudeCommand{};
  AttitudeCommand out = queue_.front();
  queue_.pop_front();
  return out;
}

Disturbance::Disturbance(const DisturbanceConfig& cfg, std::uint64_t seed,
                         double flight_duration)
    : cfg_(cfg), rng_(seed) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double heading = 2.0 * std::numbers::pi * unit(rng_);
  pulse_dir_ = Vec3(std::cos(heading), std::sin(heading), 0.0);
  const double jitter = unit(rng_) - 0.5;  // +-0.5 s around mid-flight
  pulse_start_ = std::max(0.0, 0.5 * flight_duration -
                                   0.5 * cfg_.pulse_duration + jitter);
}

Vec3 Disturbance::next(double t, double dt) {
  Vec3 f = Vec3::Zero();
  if (cfg_.pulse && t >= pulse_start_ &&
      t < pulse_start_ + cfg_.pulse_duration) {
    f += cfg_.pulse_force * pulse_dir_;
  }
  if (cfg_.wind_std > 0.0) {
    // Exact OU discretization keeps the stationary std at wind_std.
    const double a = std::exp(-dt / cfg_.wind_tau);
    const double s = cfg_.wind_std * std::sqrt(1.0 - a * a);
    std::normal_distribution<double> n(0.0, 1.0);
    wind_.x() = a * wind_.x() + s * n(rng_);
    wind_.y() = a * wind_.y() + s * n(rng_);
    f += wind_;
  }
  return f;
}

Quadrotor::Quadrotor(const PlantConfig& cfg, const VehicleState& initial,
                     const DisturbanceConfig& dist, std::uint64_t seed,
                     double flight_duration)
    : cfg_(cfg),
      state_(initial),
      motors_(hover_thrusts(cfg)),
      delay_(cfg.command_delay_steps),
      disturbance_(dist, seed, flight_duration),
      lag_alpha_(cfg.motor_time_constant > 0.0
                     ? 1.0 - std::exp(-kPlantDt / cfg.motor_time_constant)
                     : 1.0) {
  cfg_.validate();
}

void Quadrotor::step(const AttitudeCommand& cmd) {
  const AttitudeCommand applied = delay_.push(cmd);
  const MotorThrusts target = onboard_control(state_, applied, cfg_);
  if (lag_alpha_ == 1.0) {
    motors_ = target;
  } else {
    for (std::size_t i = 0; i < 4; ++i)
      motors_.f[i] += lag_alpha_ * (target.f[i] - motors_.f[i]);
  }
  const Vec3 f_ext = disturbance_.next(time(), kPlantDt);
  try {
    state_ = step_plant(state_, motors_, cfg_, kPlantDt, f_ext);
  } catch (const SimulationDiverged& e) {
    throw SimulationDiverged(std::string(e.what()) + " at plant step " +
                                 std::to_string(steps_),
                             steps_);
  }
  ++steps_;
}

}  // namespace flydraw
