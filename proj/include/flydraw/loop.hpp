#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flydraw/controller.hpp"
#include "flydraw/refgen.hpp"
#include "flydraw/sim.hpp"
#include "flydraw/trajectory.hpp"

namespace flydraw {

inline constexpr int kControlStepsPerTick = 10;

// One 7 Hz tick: desired sample, reference handed to the controller, and the
// observed vehicle state at the tick instant.
struct TickRecord {
  double t = 0.0;
  VehicleState desired;
  VehicleState reference;
  VehicleState current;
};

struct FlightLog {
  std::string trajectory_tag;
  std::string generator_tag = "baseline";
  std::vector<TickRecord> ticks;
  std::vector<AttitudeCommand> commands;  // 70 Hz, empty unless requested
  std::string error;  // set when the flight diverged; ticks then stop early

  bool complete() const { return error.empty(); }
};

struct LoopOptions {
  DisturbanceConfig disturbance;
  std::uint64_t seed = 0;
  bool record_commands = false;
};

// Plant at 210 Hz, controller every 3rd plant step, generator (when given)
// every 10th controller step with its output held in between. Without a
// generator the reference is the desired sample itself. The vehicle starts
// at rest attitude-wise on the first desired sample.
FlightLog run_closed_loop(const DesiredTrajectory& traj, const ControllerGains& gains,
                          const PlantConfig& plant, const ReferenceGenerator* generator,
                          const LoopOptions& opts = {});

}  // namespace flydraw
