#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "flydraw/controller.hpp"
#include "flydraw/refgen.hpp"
#include "flydraw/sim.hpp"
#include "flydraw/trajectory.hpp"

namespace flydraw {

struct LogRow {
  VehicleState current;
  VehicleState desired;
};

// Contiguous 7 Hz baseline record of one flight (or one piece of it).
struct RawLog {
  std::string flight_id;
  std::string trajectory_tag;
  long first_tick = 0;  // tick index of rows[0] within the flight
  std::vector<LogRow> rows;
};

struct CollectOptions {
  int flights = 4;
  std::uint64_t base_seed = 1;  // flight i uses base_seed + i
  DisturbanceConfig disturbance = [] {
    DisturbanceConfig d;
    d.wind_std = 0.05;
    return d;
  }();
  double trim_seconds = 5.0;  // dropped at both ends of every flight
  // Ticks with t in [start, end) are excluded; the flight is split around them.
  std::optional<std::pair<double, double>> holdout;
};

// Baseline flights (no generator). Throws SimulationDiverged naming the
// flight if one diverges, InvalidInput for flights < 1.
std::vector<RawLog> collect_log(const DesiredTrajectory& traj, const PlantConfig& plant,
                                const ControllerGains& gains, const CollectOptions& opts = {});

std::size_t total_rows(const std::vector<RawLog>& logs);

// Samples stored column-wise; y rows follow kOutputNames.
struct PairSet {
  FeatureConfig features;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;

  Eigen::Index size() const { return x.cols(); }
  void append(const PairSet& other);
  bool operator==(const PairSet& o) const {
    return features == o.features && x.rows() == o.x.rows() && x.cols() == o.x.cols() &&
           x == o.x && y == o.y;
  }
};

// Pair for every t with t + max_delta + 1 inside the log: inputs from the
// current state at t and the current states at t + delta_i + 1, targets
// desired(t) - current(t) for position and velocity. A log too short for
// any pair yields an empty set and a warning.
PairSet build_pairs(const RawLog& log, const FeatureConfig& cfg);
PairSet build_pairs(const std::vector<RawLog>& logs, const FeatureConfig& cfg);

// Seeded shuffle, first round(ratio * n) pairs go to training.
std::pair<PairSet, PairSet> split(const PairSet& pairs, double ratio = 0.9,
                                  std::uint64_t seed = 0);

std::string format_logs(const std::vector<RawLog>& logs);
std::vector<RawLog> parse_logs(const std::string& text);

std::string format_pairs(const PairSet& pairs);
PairSet parse_pairs(const std::string& text);

}  // namespace flydraw
