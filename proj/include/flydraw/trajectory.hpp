#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flydraw/state.hpp"

namespace flydraw {

inline constexpr double kTrajectoryRate = 7.0;
inline constexpr double kTrajectoryDt = 1.0 / kTrajectoryRate;

enum class TrajectorySource { kTraining, kDrawn, kRescaled };

std::string to_string(TrajectorySource s);
TrajectorySource source_from_string(const std::string& s);

// Uniformly sampled (7 Hz) desired trajectory. Immutable once built.
//
// Interior velocities are the central differences of the sampled positions,
// accelerations the central differences of those velocities; attitude and
// body rates are the ones a yaw-fixed vehicle needs to produce that
// acceleration. Every constructor runs validate().
class DesiredTrajectory {
public:
  DesiredTrajectory(std::vector<VehicleState> samples, TrajectorySource source);

  // Derives velocities, zacc, attitude and rates from positions.
  static DesiredTrajectory from_positions(const std::vector<Vec3>& positions,
                                          const Vec3& start_velocity,
                                          const Vec3& end_velocity,
                                          TrajectorySource source,
                                          double gravity = 9.81);

  std::size_t size() const { return samples_.size(); }
  const VehicleState& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<VehicleState>& samples() const { return samples_; }
  TrajectorySource source() const { return source_; }
  double duration() const { return (size() - 1) * kTrajectoryDt; }

  double max_speed() const;
  // Largest |v_{k+1} - v_k| / dt over the samples.
  double max_fd_accel() const;

  // Samples [first, last] as a new trajectory with the same source tag.
  DesiredTrajectory segment(std::size_t first, std::size_t last) const;

private:
  std::vector<VehicleState> samples_;
  TrajectorySource source_;
};

struct MotionBounds {
  double v_max = 0.6;  // m/s
  double a_max = 2.0;  // m/s^2
};

// Shared validator: N >= 2, finite values, finite-difference consistency of
// interior velocities (1e-6 m/s), and optional bound compliance
// (|v| <= v_max + 1e-9, finite-difference |a| <= a_max + 0.05).
// Throws InvalidInput describing the first violation.
void validate(const DesiredTrajectory& traj,
              const std::optional<MotionBounds>& bounds = std::nullopt);

struct TrainingSweep {
  DesiredTrajectory trajectory;
  Vec3 max_axis_speed;  // analytic per-axis peaks
  Vec3 max_axis_accel;
  double max_speed;     // analytic peak of |v|
  double max_accel;     // analytic peak of |a|
  double final_excursion;  // peak-to-peak amplitude reached at the end
};

struct SweepOptions {
  double duration = 400.0;
  Vec3 freqs = Vec3(0.27, 0.20, 0.13);  // Hz, x / y / z
  double amp_max = 2.0;                 // peak-to-peak excursion at the end
  double z_floor = 0.5;                 // lowest altitude reached (m)
};

// Three-axis sinusoid whose peak-to-peak excursion ramps linearly from 0 to
// amp_max, centered at (0, 0, z_floor + amp_max / 2).
TrainingSweep gen_training_trajectory(const SweepOptions& opts = {});

// Hand-drawn stroke in the x-z plane (m).
struct DrawnPath {
  std::vector<Eigen::Vector2d> points;  // (x, z)
};

struct DrawOptions {
  MotionBounds bounds;
  double smoothing_window = 0.03;  // moving-average width along arc length (m)
  double min_length = 0.01;        // below this the path is rejected (m)
};

// Removes consecutive duplicate points (closer than 1e-9 m).
DrawnPath dedup(const DrawnPath& path);

// Speed profile along a resampled path: arc-length nodes, node speeds, and
// the time at each node. Exposed for inspection and tests.
struct SpeedProfile {
  std::vector<Vec3> points;
  std::vector<double> s, v, t;
  double duration() const { return t.back(); }
};

// Smooth, resample, and time-parameterize a polyline under the bounds:
// trapezoidal ramps, curvature speed caps and a shared acceleration budget
// between tangential and centripetal components.
SpeedProfile plan_speed_profile(const DrawnPath& path,
                                const DrawOptions& opts = {});

// Full drawn-path pipeline; output lies in the x-z plane (y = 0), starts and
// ends at rest, and satisfies opts.bounds. Throws InvalidInput for degenerate
// paths.
DesiredTrajectory process_drawn_path(const DrawnPath& path,
                                     const DrawOptions& opts = {});

// Same spatial path at `factor` times the speed. Throws InvalidInput if
// factor <= 0 or the scaled peak speed exceeds speed_ceiling.
DesiredTrajectory rescale_speed(const DesiredTrajectory& traj, double factor,
                                double speed_ceiling = 1.5);

// Sample at index; past the end, the final sample with velocities, body rates
// and zacc zeroed (the vehicle parks at the goal).
VehicleState desired_state_at(const DesiredTrajectory& traj, long index);

// Line-delimited trajectory file: "# rate=7 source=<tag>" header, then
// "t x y z vx vy vz phi theta psi p q r zacc" per sample.
std::string format_trajectory(const DesiredTrajectory& traj);
DesiredTrajectory parse_trajectory(const std::string& text);

// Same record layout for an arbitrary state series (plot traces).
std::string format_state_series(const std::vector<VehicleState>& states,
                                const std::string& source_tag);

struct StateSeries {
  std::string source_tag;
  std::vector<VehicleState> states;
};
StateSeries parse_state_series(const std::string& text);

}  // namespace flydraw
