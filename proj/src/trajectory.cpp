#include "flydraw/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"

namespace flydraw {

namespace {

constexpr double kFdTolerance = 1e-6;
constexpr double kNodeSpacing = 0.005;   // m, arc-length grid of the planner
constexpr double kCurvatureChord = 0.02;  // m, baseline for curvature estimates
constexpr double kCentripetalShare = 0.8;

Vec3 to_world(const Eigen::Vector2d& xz) { return {xz.x(), 0.0, xz.y()}; }

double polyline_length(const std::vector<Vec3>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

// n + 1 points evenly spaced in arc length along the polyline.
std::vector<Vec3> resample_uniform(const std::vector<Vec3>& pts, std::size_t n) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cum.back();
  std::vector<Vec3> out;
  out.reserve(n + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 2 < pts.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double u = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(pts[seg] + u * (pts[seg + 1] - pts[seg]));
  }
  out.front() = pts.front();
  out.back() = pts.back();
  return out;
}

// Symmetric moving average; the window shrinks near the ends so both
// endpoints stay fixed.
std::vector<Vec3> moving_average(const std::vector<Vec3>& pts, std::size_t half) {
  const std::size_t n = pts.size();
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = std::min({half, i, n - 1 - i});
    Vec3 acc = Vec3::Zero();
    for (std::size_t j = i - k; j <= i + k; ++j) acc += pts[j];
    out[i] = acc / static_cast<double>(2 * k + 1);
  }
  return out;
}

// Menger curvature through three points.
// Turning angle between the chords a->b and b->c per unit arc length. Unlike
// the circumcircle this stays finite and large on a hairpin.
double curvature(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = b - a, w = c - b;
  const double len = 0.5 * (u.norm() + w.norm());
  if (u.norm() <= 0.0 || w.norm() <= 0.0) return 0.0;
  return std::atan2(u.cross(w).norm(), u.dot(w)) / len;
}

Vec3 hermite(const Vec3& p0, const Vec3& m0, const Vec3& p1, const Vec3& m1,
             double u) {
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 +
         (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1;
}

}  // namespace

std::string to_string(TrajectorySource s) {
  switch (s) {
    case TrajectorySource::kTraining: return "training";
    case TrajectorySource::kDrawn: return "drawn";
    case TrajectorySource::kRescaled: return "rescaled";
  }
  return "unknown";
}

TrajectorySource source_from_string(const std::string& s) {
  if (s == "training") return TrajectorySource::kTraining;
  if (s == "drawn") return TrajectorySource::kDrawn;
  if (s == "rescaled") return TrajectorySource::kRescaled;
  throw FormatError("unknown trajectory source '" + s + "'");
}

DesiredTrajectory::DesiredTrajectory(std::vector<VehicleState> samples,
                                     TrajectorySource source)
    : samples_(std::move(samples)), source_(source) {
  validate(*this);
}

DesiredTrajectory DesiredTrajectory::from_positions(
    const std::vector<Vec3>& positions, const Vec3& start_velocity,
    const Vec3& end_velocity, TrajectorySource source, double gravity) {
  const std::size_t n = positions.size();
  if (n < 2) throw InvalidInput("trajectory needs at least 2 samples");
  const double dt = kTrajectoryDt;

  std::vector<Vec3> vel(n), acc(n);
  vel.front() = start_velocity;
  vel.back() = end_velocity;
  for (std::size_t i = 1; i + 1 < n; ++i)
    vel[i] = (positions[i + 1] - positions[i - 1]) / (2.0 * dt);
  acc.front() = (vel[1] - vel[0]) / dt;
  acc.back() = (vel[n - 1] - vel[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i)
    acc[i] = (vel[i + 1] - vel[i - 1]) / (2.0 * dt);

  std::vector<Vec3> euler(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = acc[i].x(), ay = acc[i].y(), az = gravity + acc[i].z();
    euler[i] = Vec3(std::atan2(-ay, std::hypot(ax, az)), std::atan2(ax, az), 0.0);
  }

  std::vector<VehicleState> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 rate;
    if (i == 0) rate = (euler[1] - euler[0]) / dt;
    else if (i + 1 == n) rate = (euler[n - 1] - euler[n - 2]) / dt;
    else rate = (euler[i + 1] - euler[i - 1]) / (2.0 * dt);
    const double phi = euler[i].x();
    VehicleState& s = samples[i];
    s.p = positions[i];
    s.v = vel[i];
    s.euler = euler[i];
    // Yaw is held at zero, so only roll and pitch rates feed the body rates.
    s.omega = Vec3(rate.x(), std::cos(phi) * rate.y(), -std::sin(phi) * rate.y());
    s.zacc = acc[i].z();
  }
  return DesiredTrajectory(std::move(samples), source);
}

double DesiredTrajectory::max_speed() const {
  double m = 0.0;
  for (const auto& s : samples_) m = std::max(m, s.v.norm());
  return m;
}

double DesiredTrajectory::max_fd_accel() const {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < samples_.size(); ++i)
    m = std::max(m, (samples_[i + 1].v - samples_[i].v).norm() / kTrajectoryDt);
  return m;
}

DesiredTrajectory DesiredTrajectory::segment(std::size_t first,
                                             std::size_t last) const {
  if (first >= last || last >= samples_.size())
    throw InvalidInput("segment bounds out of range");
  return DesiredTrajectory(
      std::vector<VehicleState>(samples_.begin() + first,
                                samples_.begin() + last + 1),
      source_);
}

void validate(const DesiredTrajectory& traj,
              const std::optional<MotionBounds>& bounds) {
  const auto& s = traj.samples();
  if (s.size() < 2) throw InvalidInput("trajectory needs at least 2 samples");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i].finite())
      throw InvalidInput("non-finite trajectory sample " + std::to_string(i));
  }
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const Vec3 fd = (s[i + 1].p - s[i - 1].p) / (2.0 * kTrajectoryDt);
    if ((fd - s[i].v).cwiseAbs().maxCoeff() > kFdTolerance)
      throw InvalidInput("velocity at sample " + std::to_string(i) +
                         " disagrees with the central difference of positions");
  }
  if (bounds) {
    const double v = traj.max_speed();
    if (v > bounds->v_max + 1e-9)
      throw InvalidInput("speed " + io::format_double(v) + " m/s exceeds bound " +
                         io::format_double(bounds->v_max));
    const double a = traj.max_fd_accel();
    if (a > bounds->a_max + 0.05)
      throw InvalidInput("acceleration " + io::format_double(a) +
                         " m/s^2 exceeds bound " + io::format_double(bounds->a_max));
  }
}

TrainingSweep gen_training_trajectory(const SweepOptions& opts) {
  if (!(opts.duration > 0.0))
    throw InvalidInput("training sweep duration must be > 0");
  const double T = opts.duration;
  const Vec3 w = 2.0 * std::numbers::pi * opts.freqs;
  const Vec3 center(0.0, 0.0, opts.z_floor + 0.5 * opts.amp_max);
  const double half_rate = 0.5 * opts.amp_max / T;  // d/dt of half-amplitude

  auto position = [&](double t) {
    const double h = half_rate * t;
    return Vec3(center.x() + h * std::sin(w.x() * t),
                center.y() + h * std::sin(w.y() * t),
                center.z() + h * std::sin(w.z() * t));
  };
  auto velocity = [&](double t) {
    const double h = half_rate * t;
    Vec3 v;
    for (int i = 0; i < 3; ++i)
      v[i] = half_rate * std::sin(w[i] * t) + h * w[i] * std::cos(w[i] * t);
    return v;
  };
  auto acceleration = [&](double t) {
    const double h = half_rate * t;
    Vec3 a;
    for (int i = 0; i < 3; ++i)
      a[i] = 2.0 * half_rate * w[i] * std::cos(w[i] * t) -
             h * w[i] * w[i] * std::sin(w[i] * t);
    return a;
  };

  const auto n = static_cast<std::size_t>(std::llround(T * kTrajectoryRate)) + 1;
  std::vector<Vec3> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[k] = position(k * kTrajectoryDt);
  const double t_end = (n - 1) * kTrajectoryDt;

  Vec3 vmax = Vec3::Zero(), amax = Vec3::Zero();
  double vnorm = 0.0, anorm = 0.0;
  const int fine = static_cast<int>(T * 100.0);
  for (int k = 0; k <= fine; ++k) {
    const double t = T * k / fine;
    const Vec3 v = velocity(t), a = acceleration(t);
    vmax = vmax.cwiseMax(v.cwiseAbs());
    amax = amax.cwiseMax(a.cwiseAbs());
    vnorm = std::max(vnorm, v.norm());
    anorm = std::max(anorm, a.norm());
  }

  return TrainingSweep{
      DesiredTrajectory::from_positions(pos, velocity(0.0), velocity(t_end),
                                        TrajectorySource::kTraining),
      vmax, amax, vnorm, anorm, 2.0 * half_rate * T};
}

DrawnPath dedup(const DrawnPath& path) {
  DrawnPath out;
  for (const auto& p : path.points) {
    if (out.points.empty() || (p - out.points.back()).norm() > 1e-9)
      out.points.push_back(p);
  }
  return out;
}

SpeedProfile plan_speed_profile(const DrawnPath& path, const DrawOptions& opts) {
  const DrawnPath clean = dedup(path);
  if (clean.points.size() < 2)
    throw InvalidInput("degenerate path: fewer than two distinct points");
  std::vector<Vec3> raw;
  raw.reserve(clean.points.size());
  for (const auto& p : clean.points) raw.push_back(to_world(p));
  const double raw_len = polyline_length(raw);
  if (raw_len < opts.min_length)
    throw InvalidInput("degenerate path: length " + io::format_double(raw_len) +
                       " m is below " + io::format_double(opts.min_length) + " m");
  if (!(opts.bounds.v_max > 0.0) || !(opts.bounds.a_max > 0.0))
    throw InvalidInput("motion bounds must be > 0");

  auto n_for = [](double len) {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(len / kNodeSpacing - 1e-9)));
  };
  std::vector<Vec3> fine = resample_uniform(raw, n_for(raw_len));
  const double fine_ds = raw_len / static_cast<double>(fine.size() - 1);
  const auto half = static_cast<std::size_t>(
      std::llround(0.5 * opts.smoothing_window / fine_ds));
  const std::vector<Vec3> smooth = moving_average(fine, half);

  SpeedProfile prof;
  prof.points = resample_uniform(smooth, n_for(polyline_length(smooth)));
  const std::size_t n = prof.points.size();
  prof.s.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    prof.s[i] = prof.s[i - 1] + (prof.points[i] - prof.points[i - 1]).norm();
  const double ds_mean = prof.s.back() / static_cast<double>(n - 1);

  std::vector<double> kappa(n, 0.0);
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kCurvatureChord / ds_mean)));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= m ? i - m : 0;
    const std::size_t hi = std::min(n - 1, i + m);
    if (lo < i && i < hi) kappa[i] = curvature(prof.points[lo], prof.points[i], prof.points[hi]);
  }

  const double vmax = opts.bounds.v_max, amax = opts.bounds.a_max;
  std::vector<double> vlim(n);
  for (std::size_t i = 0; i < n; ++i) {
    vlim[i] = vmax;
    if (kappa[i] > 0.0)
      vlim[i] = std::min(vmax, std::sqrt(kCentripetalShare * amax / kappa[i]));
  }
  // Tangential budget left over after the centripetal share at speed v.
  auto tangential = [&](double v, double k) {
    const double an = v * v * k;
    return std::sqrt(std::max(0.0, amax * amax - an * an));
  };

  std::vector<double> v(n);
  v[0] = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double k = std::max(kappa[i], kappa[i + 1]);
    const double ds = prof.s[i + 1] - prof.s[i];
    const double reach = std::sqrt(v[i] * v[i] + 2.0 * tangential(v[i], k) * ds);
    v[i + 1] = std::min(vlim[i + 1], reach);
  }
  v[n - 1] = 0.0;
  for (std::size_t i = n - 1; i > 0; --i) {
    const double k = std::max(kappa[i], kappa[i - 1]);
    const double ds = prof.s[i] - prof.s[i - 1];
    const double reach = std::sqrt(v[i] * v[i] + 2.0 * tangential(v[i], k) * ds);
    v[i - 1] = std::min(v[i - 1], reach);
  }

  prof.t.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double vsum = v[i] + v[i + 1];
    if (!(vsum > 0.0)) throw InvalidInput("degenerate path: zero-speed segment");
    prof.t[i + 1] = prof.t[i] + 2.0 * (prof.s[i + 1] - prof.s[i]) / vsum;
  }
  prof.v = std::move(v);
  return prof;
}

namespace {

std::vector<Vec3> sample_profile(const SpeedProfile& prof) {
  const double T = prof.duration();
  const auto count = static_cast<std::size_t>(std::ceil(T * kTrajectoryRate - 1e-9));
  std::vector<Vec3> out;
  out.reserve(count + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= count; ++k) {
    const double t = k * kTrajectoryDt;
    if (t >= T) {
      out.push_back(prof.points.back());
      continue;
    }
    while (seg + 2 < prof.t.size() && prof.t[seg + 1] <= t) ++seg;
    const double ds = prof.s[seg + 1] - prof.s[seg];
    const double tau = t - prof.t[seg];
    const double v0 = prof.v[seg], v1 = prof.v[seg + 1];
    const double a = (v1 * v1 - v0 * v0) / (2.0 * ds);
    const double along = std::clamp(v0 * tau + 0.5 * a * tau * tau, 0.0, ds);
    out.push_back(prof.points[seg] +
                  (along / ds) * (prof.points[seg + 1] - prof.points[seg]));
  }
  // Pad so the final sample is at rest in the finite-difference sense too.
  out.push_back(prof.points.back());
  return out;
}

}  // namespace

DesiredTrajectory process_drawn_path(const DrawnPath& path,
                                     const DrawOptions& opts) {
  // The discrete samples can overshoot the continuous bounds by a hair on
  // tight corners; shrink the planning acceleration until they comply.
  DrawOptions plan = opts;
  std::string reason;
  for (int attempt = 0; attempt < 12; ++attempt) {
    const SpeedProfile prof = plan_speed_profile(path, plan);
    DesiredTrajectory traj = DesiredTrajectory::from_positions(
        sample_profile(prof), Vec3::Zero(), Vec3::Zero(), TrajectorySource::kDrawn);
    try {
      validate(traj, opts.bounds);
      return traj;
    } catch (const InvalidInput& e) {
      reason = e.what();
      plan.bounds.a_max *= 0.93;
    }
  }
  throw InvalidInput("could not satisfy motion bounds for the drawn path: " + reason);
}

DesiredTrajectory rescale_speed(const DesiredTrajectory& traj, double factor,
                                double speed_ceiling) {
  if (!(factor > 0.0)) throw InvalidInput("speed factor must be > 0");
  const double peak = traj.max_speed() * factor;
  if (peak > speed_ceiling)
    throw InvalidInput("rescaled peak speed " + io::format_double(peak) +
                       " m/s exceeds the ceiling " + io::format_double(speed_ceiling));

  const std::size_t n = traj.size();
  const double last = static_cast<double>(n - 1);
  const auto count = static_cast<std::size_t>(std::ceil(last / factor - 1e-9));
  std::vector<Vec3> pos;
  pos.reserve(count + 1);
  for (std::size_t j = 0; j <= count; ++j) {
    // Position in units of original samples.
    const double x = static_cast<double>(j) * factor;
    if (x >= last) {
      pos.push_back(traj[n - 1].p);
      continue;
    }
    const auto k = static_cast<std::size_t>(std::floor(x));
    const double u = x - static_cast<double>(k);
    if (u == 0.0) {
      pos.push_back(traj[k].p);
      continue;
    }
    pos.push_back(hermite(traj[k].p, traj[k].v * kTrajectoryDt, traj[k + 1].p,
                          traj[k + 1].v * kTrajectoryDt, u));
  }
  if (pos.size() < 2) pos.push_back(traj[n - 1].p);
  DesiredTrajectory out = DesiredTrajectory::from_positions(
      pos, traj[0].v * factor, traj[n - 1].v * factor, TrajectorySource::kRescaled);
  if (out.max_speed() > speed_ceiling)
    throw InvalidInput("rescaled trajectory exceeds the speed ceiling");
  return out;
}

VehicleState desired_state_at(const DesiredTrajectory& traj, long index) {
  if (index < 0) throw InvalidInput("trajectory index must be >= 0");
  if (static_cast<std::size_t>(index) < traj.size()) return traj[index];
  VehicleState s = traj[traj.size() - 1];
  s.v.setZero();
  s.omega.setZero();
  s.zacc = 0.0;
  return s;
}

std::string format_state_series(const std::vector<VehicleState>& states,
                                const std::string& source_tag) {
  std::ostringstream out;
  out << "# rate=" << io::format_double(kTrajectoryRate) << " source=" << source_tag
      << " n=" << states.size() << "\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    out << io::format_double(static_cast<double>(i) * kTrajectoryDt);
    for (double x : states[i].to_array()) out << ' ' << io::format_double(x);
    out << '\n';
  }
  return out.str();
}

StateSeries parse_state_series(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.rfind("#", 0) != 0)
    throw FormatError("trajectory file: missing header line");
  StateSeries out;
  const double rate = io::parse_double(io::header_value(header, "rate"));
  if (rate != kTrajectoryRate)
    throw FormatError("trajectory file: unsupported sample rate " + io::format_double(rate));
  out.source_tag = io::header_value(header, "source");
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tok = io::split_ws(line);
    if (tok.size() != 1 + VehicleState::kSize)
      throw FormatError("trajectory file: line " + std::to_string(lineno) +
                        " has " + std::to_string(tok.size()) + " fields, expected 14");
    std::array<double, VehicleState::kSize> a{};
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = io::parse_double(tok[i + 1]);
    out.states.push_back(VehicleState::from_array(a));
  }
  return out;
}

std::string format_trajectory(const DesiredTrajectory& traj) {
  return format_state_series(traj.samples(), to_string(traj.source()));
}

DesiredTrajectory parse_trajectory(const std::string& text) {
  StateSeries s = parse_state_series(text);
  return DesiredTrajectory(std::move(s.states), source_from_string(s.source_tag));
}

}  // namespace flydraw
