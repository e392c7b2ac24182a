#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flydraw/controller.hpp"
#include "flydraw/loop.hpp"
#include "flydraw/refgen.hpp"
#include "flydraw/sim.hpp"
#include "flydraw/trajectory.hpp"

namespace flydraw {

// RMS over the 7 Hz ticks of |p_c - p_d|. Throws InvalidInput on an empty log.
double rms_error(const FlightLog& log);
double peak_error(const FlightLog& log);
Vec3 axis_rms_error(const FlightLog& log);

// Percent reduction of e_dnn relative to e_base; throws InvalidInput when
// e_base is not positive.
double improvement(double e_dnn, double e_base);

struct EvalSetup {
  PlantConfig plant;
  ControllerGains gains;
  DisturbanceConfig disturbance;
  std::uint64_t seed = 0;
};

struct NamedTrajectory {
  std::string name;
  DesiredTrajectory trajectory;
};

struct ExperimentReport {
  std::string experiment;
  std::string trajectory;
  std::string config;  // "baseline" or a generator configuration name
  double speed_factor = 1.0;
  std::uint64_t seed = 0;
  bool pulse = false;
  double rms_error = 0.0;
  double peak_error = 0.0;
  Vec3 axis_rms = Vec3::Zero();
  double baseline_rms = 0.0;
  double improvement = 0.0;  // 0 for baseline rows
  bool complete = true;

  bool operator==(const ExperimentReport&) const = default;
};

struct ExperimentRun {
  ExperimentReport report;
  FlightLog log;
};

using GeneratorSet = std::map<std::string, const ReferenceGenerator*>;

// Baseline plus one run per generator, all on the same trajectory, plant
// and disturbance seed. Rows come back baseline first, then in `order`.
std::vector<ExperimentRun> paired_runs(const std::string& experiment, const NamedTrajectory& traj,
                                       const GeneratorSet& generators,
                                       const std::vector<std::string>& order, const EvalSetup& setup,
                                       double speed_factor = 1.0);

// The three generator configurations against the baseline on every
// trajectory. Throws ConfigError if one of them is missing.
std::vector<ExperimentRun> ablation_suite(const std::vector<NamedTrajectory>& trajectories,
                                          const GeneratorSet& generators, const EvalSetup& setup);

// Both future-state generators against the baseline with the force pulse
// active, once per pulse seed. Throws ConfigError if one of them is missing.
std::vector<ExperimentRun> disturbance_suite(const NamedTrajectory& traj, const GeneratorSet& generators,
                                             const EvalSetup& setup,
                                             const std::vector<std::uint64_t>& pulse_seeds);

// rescale_speed per factor, then paired baseline/generator runs.
std::vector<ExperimentRun> speed_sweep(const NamedTrajectory& traj, const std::vector<double>& factors,
                                       const ReferenceGenerator& generator, const EvalSetup& setup);

inline const std::vector<double> kSweepFactors{0.67, 0.83, 1.0, 1.17, 1.33, 1.67};

// Aggregate of the rows for one configuration.
struct ConfigSummary {
  std::string config;
  int runs = 0;
  double mean_rms = 0.0;
  double mean_improvement = 0.0;
  double fraction_improved = 0.0;
};
std::vector<ConfigSummary> summarize(const std::vector<ExperimentReport>& reports);

// The bundled drawn paths, processed.
std::vector<NamedTrajectory> bundled_test_trajectories();

std::vector<ExperimentReport> reports_of(const std::vector<ExperimentRun>& runs);

// CSV with the columns of kReportColumns.
extern const std::vector<std::string> kReportColumns;
std::string format_report_csv(const std::vector<ExperimentReport>& reports);
std::vector<ExperimentReport> parse_report_csv(const std::string& text);

// Writes <dir>/reports.csv and, per run, desired/actual/reference traces as
// state series under <dir>/traces/.
void emit_report(const std::vector<ExperimentRun>& runs, const std::string& dir);

}  // namespace flydraw
