#include "flydraw/loop.hpp"

#include "flydraw/errors.hpp"

namespace flydraw {

FlightLog run_closed_loop(const DesiredTrajectory& traj, const ControllerGains& gains,
                          const PlantConfig& plant, const ReferenceGenerator* generator,
                          const LoopOptions& opts) {
  gains.validate();
  plant.validate();

  VehicleState initial;
  initial.p = traj[0].p;
  initial.v = traj[0].v;
  initial.euler = traj[0].euler;
  Quadrotor quad(plant, initial, opts.disturbance, opts.seed, traj.duration());

  FlightLog log;
  log.trajectory_tag = to_string(traj.source());
  if (generator) log.generator_tag = generator->features().name;
  log.ticks.reserve(traj.size());
  if (opts.record_commands)
    log.commands.reserve(traj.size() * kControlStepsPerTick);

  const long n = static_cast<long>(traj.size());
  for (long k = 0; k < n; ++k) {
    TickRecord rec;
    rec.t = static_cast<double>(k) * kTrajectoryDt;
    rec.desired = traj[k];
    rec.current = quad.state();
    rec.reference = generator ? generator->generate(traj, k, rec.current) : traj[k];
    log.ticks.push_back(rec);
    if (k + 1 == n) break;
    try {
      for (int c = 0; c < kControlStepsPerTick; ++c) {
        const AttitudeCommand cmd = compute_command(rec.reference, quad.state(), gains);
        if (opts.record_commands) log.commands.push_back(cmd);
        for (int s = 0; s < kPlantStepsPerControl; ++s) quad.step(cmd);
      }
    } catch (const SimulationDiverged& e) {
      log.error = std::string(e.what()) + " (7 Hz tick " + std::to_string(k) + ")";
      break;
    }
  }
  return log;
}

}  // namespace flydraw
