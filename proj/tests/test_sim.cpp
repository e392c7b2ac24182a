#include <cmath>

#include "doctest.h"
#include "flydraw/errors.hpp"
#include "flydraw/sim.hpp"

using namespace flydraw;

namespace {

PlantConfig ideal_plant() {
  PlantConfig cfg;
  cfg.drag_coeff = Vec3::Zero();
  cfg.command_delay_steps = 0;
  cfg.motor_time_constant = 0.0;
  return cfg;
}

VehicleState hover_at(const Vec3& p) {
  VehicleState s;
  s.p = p;
  return s;
}

double mechanical_energy(const VehicleState& s, const PlantConfig& cfg) {
  const double kin = 0.5 * cfg.mass * s.v.squaredNorm() +
                     0.5 * s.omega.dot(cfg.inertia.cwiseProduct(s.omega));
  return kin + cfg.mass * cfg.gravity * s.p.z();
}

}  // namespace

TEST_CASE("hover thrust leaves the state unchanged") {
  const PlantConfig cfg = ideal_plant();
  const VehicleState s0 = hover_at(Vec3(0.3, -0.2, 1.5));
  const VehicleState s1 = step_plant(s0, hover_thrusts(cfg), cfg, kPlantDt);
  CHECK(s1 == s0);
}

TEST_CASE("free fall loses g*dt of vertical speed") {
  const PlantConfig cfg = ideal_plant();
  MotorThrusts zero;
  const VehicleState s1 = step_plant(hover_at(Vec3(0, 0, 2)), zero, cfg, 0.005);
  CHECK(s1.v.z() == doctest::Approx(-0.04905).epsilon(1e-12));
  CHECK(s1.zacc == doctest::Approx(-9.81));
}

TEST_CASE("linear drag matches the analytic exponential decay") {
  PlantConfig cfg = ideal_plant();
  cfg.drag_coeff = Vec3(0.3, 0.3, 0.4);
  VehicleState s = hover_at(Vec3(0, 0, 1));
  s.v.x() = 1.0;
  const int steps = static_cast<int>(std::lround(kPlantRate));
  for (int i = 0; i < steps; ++i) s = step_plant(s, hover_thrusts(cfg), cfg, kPlantDt);
  const double expected = std::exp(-cfg.drag_coeff.x() * 1.0 / cfg.mass);
  CHECK(std::abs(s.v.x() - expected) < 1e-3);
}

TEST_CASE("free flight conserves mechanical energy") {
  const PlantConfig cfg = ideal_plant();
  VehicleState s = hover_at(Vec3(0, 0, 3));
  s.v = Vec3(0.4, -0.2, 1.0);
  s.omega = Vec3(0.3, -0.1, 0.2);
  MotorThrusts zero;
  double e = mechanical_energy(s, cfg);
  for (int i = 0; i < 200; ++i) {
    s = step_plant(s, zero, cfg, kPlantDt);
    const double e1 = mechanical_energy(s, cfg);
    CHECK(std::abs(e1 - e) < 1e-6);
    e = e1;
  }
}

TEST_CASE("step_plant is deterministic") {
  const PlantConfig cfg;
  VehicleState s = hover_at(Vec3(1, 2, 3));
  s.v = Vec3(0.1, 0.2, -0.3);
  s.euler = Vec3(0.05, -0.02, 0.01);
  MotorThrusts m;
  m.f = {1.1, 1.3, 1.2, 1.25};
  CHECK(step_plant(s, m, cfg, kPlantDt) == step_plant(s, m, cfg, kPlantDt));
}

TEST_CASE("tilt guard reports divergence") {
  const PlantConfig cfg = ideal_plant();
  VehicleState s = hover_at(Vec3(0, 0, 1));
  s.euler.x() = 1.39;
  s.omega.x() = 5.0;
  CHECK_THROWS_AS(step_plant(s, hover_thrusts(cfg), cfg, kPlantDt), SimulationDiverged);

  Quadrotor quad(cfg, s);
  try {
    quad.step(AttitudeCommand{});
    FAIL("expected divergence");
  } catch (const SimulationDiverged& e) {
    CHECK(e.step() == 0);
  }
}

TEST_CASE("step_plant rejects non-positive dt") {
  const PlantConfig cfg;
  CHECK_THROWS_AS(step_plant(VehicleState{}, hover_thrusts(cfg), cfg, 0.0), InvalidInput);
}

TEST_CASE("onboard control at hover returns equal split") {
  const PlantConfig cfg;
  const MotorThrusts m = onboard_control(hover_at(Vec3(0, 0, 1)), AttitudeCommand{}, cfg);
  for (double f : m.f) CHECK(f == doctest::Approx(cfg.mass * cfg.gravity / 4.0).epsilon(1e-15));
}

TEST_CASE("positive roll command produces positive roll rate") {
  const PlantConfig cfg = ideal_plant();
  AttitudeCommand cmd;
  cmd.phi_cmd = 0.2;
  const VehicleState s0 = hover_at(Vec3(0, 0, 1));
  const MotorThrusts m = onboard_control(s0, cmd, cfg);
  CHECK(m.f[1] > m.f[3]);
  const VehicleState s1 = step_plant(s0, m, cfg, kPlantDt);
  CHECK(s1.omega.x() > 0.0);
  CHECK(s1.euler.x() > 0.0);
}

TEST_CASE("positive pitch command produces positive pitch rate") {
  const PlantConfig cfg = ideal_plant();
  AttitudeCommand cmd;
  cmd.theta_cmd = 0.2;
  const VehicleState s0 = hover_at(Vec3(0, 0, 1));
  const VehicleState s1 = step_plant(s0, onboard_control(s0, cmd, cfg), cfg, kPlantDt);
  CHECK(s1.omega.y() > 0.0);
}

TEST_CASE("saturating commands clip the motors") {
  const PlantConfig cfg;
  AttitudeCommand up;
  up.zvel_cmd = 50.0;
  for (double f : onboard_control(hover_at(Vec3::Zero()), up, cfg).f)
    CHECK(f == cfg.thrust_limits.max);
  AttitudeCommand down;
  down.zvel_cmd = -50.0;
  for (double f : onboard_control(hover_at(Vec3::Zero()), down, cfg).f)
    CHECK(f == cfg.thrust_limits.min);
}

TEST_CASE("command delay") {
  AttitudeCommand c;
  c.phi_cmd = 0.1;
  c.zvel_cmd = -0.3;

  SUBCASE("zero delay is the identity") {
    CommandDelay d(0);
    CHECK(d.push(c) == c);
  }
  SUBCASE("constant stream emerges after the delay") {
    CommandDelay d(3);
    for (int i = 0; i < 3; ++i) CHECK(d.push(c) == AttitudeCommand{});
    CHECK(d.push(c) == c);
    CHECK(d.push(c) == c);
  }
  SUBCASE("impulse emerges delay steps later") {
    CommandDelay d(3);
    const int k = 5;
    for (int i = 0; i < 15; ++i) {
      const AttitudeCommand out = d.push(i == k ? c : AttitudeCommand{});
      CHECK((out == c) == (i == k + 3));
    }
  }
  CHECK_THROWS_AS(CommandDelay(-1), InvalidInput);
}

TEST_CASE("closed inner loop holds hover to machine precision") {
  PlantConfig cfg = ideal_plant();
  cfg.motor_time_constant = 0.05;  // motors start at hover, lag is inert
  const VehicleState s0 = hover_at(Vec3(0.5, 0.5, 1.0));
  Quadrotor quad(cfg, s0);
  for (int i = 0; i < 2000; ++i) quad.step(AttitudeCommand{});
  CHECK(quad.state() == s0);
}

TEST_CASE("loop latency equals delay steps times the inner period") {
  for (int delay : {0, 3, 6}) {
    PlantConfig cfg = ideal_plant();
    cfg.command_delay_steps = delay;
    const VehicleState s0 = hover_at(Vec3(0, 0, 1));
    Quadrotor quad(cfg, s0);
    const int k = 10;
    int first_response = -1;
    AttitudeCommand impulse;
    impulse.phi_cmd = 0.1;
    for (int i = 0; i < 40; ++i) {
      quad.step(i == k ? impulse : AttitudeCommand{});
      if (first_response < 0 && quad.state().omega.x() != 0.0) first_response = i;
    }
    CHECK(first_response - k == delay);
  }
}

TEST_CASE("disturbance pulse is seeded and bounded in time") {
  DisturbanceConfig dc;
  dc.pulse = true;
  Disturbance a(dc, 7, 20.0), b(dc, 7, 20.0), c(dc, 8, 20.0);
  CHECK(a.pulse_start() == b.pulse_start());
  CHECK(a.pulse_direction() == b.pulse_direction());
  CHECK(a.pulse_direction() != c.pulse_direction());
  CHECK(a.pulse_start() >= 9.0);
  CHECK(a.pulse_start() <= 10.0);
  double impulse = 0.0;
  for (int i = 0; i < 20 * 210; ++i) impulse += a.next(i * kPlantDt, kPlantDt).norm() * kPlantDt;
  CHECK(impulse == doctest::Approx(0.5 * 1.0).epsilon(0.01));
}

TEST_CASE("plant config validation") {
  PlantConfig cfg;
  cfg.mass = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = PlantConfig{};
  cfg.command_delay_steps = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = PlantConfig{};
  cfg.inertia.y() = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}
