#include "flydraw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "flydraw/diag.hpp"
#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"
#include "flydraw/loop.hpp"

namespace flydraw {

std::vector<RawLog> collect_log(const DesiredTrajectory& traj, const PlantConfig& plant,
                                const ControllerGains& gains, const CollectOptions& opts) {
  if (opts.flights < 1) throw InvalidInput("collect_log needs at least one flight");
  if (opts.trim_seconds < 0.0) throw InvalidInput("trim_seconds must be >= 0");

  const long n = static_cast<long>(traj.size());
  const long trim = std::lround(opts.trim_seconds * kTrajectoryRate);
  long hold_begin = n, hold_end = n;
  if (opts.holdout) {
    if (!(opts.holdout->second > opts.holdout->first)) throw InvalidInput("holdout window is empty");
    // A window past the end of a short trajectory excludes nothing.
    hold_begin = std::clamp(static_cast<long>(std::ceil(opts.holdout->first * kTrajectoryRate)), 0L, n);
    hold_end = std::clamp(static_cast<long>(std::ceil(opts.holdout->second * kTrajectoryRate)), 0L, n);
  }

  std::vector<RawLog> logs;
  for (int f = 0; f < opts.flights; ++f) {
    LoopOptions lo;
    lo.disturbance = opts.disturbance;
    lo.seed = opts.base_seed + static_cast<std::uint64_t>(f);
    const FlightLog flight = run_closed_loop(traj, gains, plant, nullptr, lo);
    const std::string id = "flight" + std::to_string(f);
    if (!flight.complete()) throw SimulationDiverged("collection " + id + ": " + flight.error);

    RawLog piece{id, to_string(traj.source()), 0, {}};
    auto flush = [&] {
      if (!piece.rows.empty()) logs.push_back(piece);
      piece.rows.clear();
    };
    for (long k = trim; k < n - trim; ++k) {
      if (k >= hold_begin && k < hold_end) {
        flush();
        continue;
      }
      if (piece.rows.empty()) piece.first_tick = k;
      piece.rows.push_back({flight.ticks[k].current, flight.ticks[k].desired});
    }
    flush();
  }
  return logs;
}

std::size_t total_rows(const std::vector<RawLog>& logs) {
  std::size_t n = 0;
  for (const RawLog& l : logs) n += l.rows.size();
  return n;
}

void PairSet::append(const PairSet& other) {
  if (other.size() == 0) return;
  if (size() == 0 && x.rows() == 0) {
    *this = other;
    return;
  }
  if (!(features == other.features)) throw ConfigError("cannot merge pairs built for different features");
  const Eigen::Index n = size();
  x.conservativeResize(x.rows(), n + other.size());
  y.conservativeResize(y.rows(), n + other.size());
  x.rightCols(other.size()) = other.x;
  y.rightCols(other.size()) = other.y;
}

PairSet build_pairs(const RawLog& log, const FeatureConfig& cfg) {
  cfg.validate();
  const long rows = static_cast<long>(log.rows.size());
  const long reach = cfg.max_delta() + 1;
  const long count = std::max(0L, rows - reach);
  PairSet out{cfg, Eigen::MatrixXd(cfg.feature_length(), count), Eigen::MatrixXd(kOutputs, count)};
  if (count == 0) {
    warn("log '" + log.flight_id + "' has " + std::to_string(rows) + " rows, too short for lookahead " +
         std::to_string(reach) + "; no pairs");
    return out;
  }
  std::vector<VehicleState> selected(cfg.deltas.size());
  for (long t = 0; t < count; ++t) {
    const LogRow& row = log.rows[t];
    for (std::size_t i = 0; i < cfg.deltas.size(); ++i)
      selected[i] = log.rows[t + cfg.deltas[i] + 1].current;
    out.x.col(t) = build_features(row.current, selected, cfg);
    const Vec3 dp = row.desired.p - row.current.p;
    const Vec3 dv = row.desired.v - row.current.v;
    out.y.col(t) << dp, dv;
  }
  return out;
}

PairSet build_pairs(const std::vector<RawLog>& logs, const FeatureConfig& cfg) {
  PairSet all{cfg, Eigen::MatrixXd(cfg.feature_length(), 0), Eigen::MatrixXd(kOutputs, 0)};
  for (const RawLog& l : logs) all.append(build_pairs(l, cfg));
  return all;
}

std::pair<PairSet, PairSet> split(const PairSet& pairs, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidInput("split ratio must be in [0, 1]");
  const Eigen::Index n = pairs.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  const Eigen::Index n_train = std::llround(ratio * static_cast<double>(n));
  auto take = [&](Eigen::Index from, Eigen::Index to) {
    PairSet s{pairs.features, Eigen::MatrixXd(pairs.x.rows(), to - from),
              Eigen::MatrixXd(pairs.y.rows(), to - from)};
    for (Eigen::Index k = from; k < to; ++k) {
      s.x.col(k - from) = pairs.x.col(order[static_cast<std::size_t>(k)]);
      s.y.col(k - from) = pairs.y.col(order[static_cast<std::size_t>(k)]);
    }
    return s;
  };
  return {take(0, n_train), take(n_train, n)};
}

namespace {

void put_values(std::ostringstream& out, const double* v, int n, bool& first) {
  for (int i = 0; i < n; ++i) {
    if (!first) out << ' ';
    out << io::format_double(v[i]);
    first = false;
  }
}

std::vector<double> row_values(const std::string& line, std::size_t expect, const char* what) {
  const auto tok = io::split_ws(line);
  if (tok.size() != expect)
    throw FormatError(std::string(what) + ": expected " + std::to_string(expect) + " values, got " +
                      std::to_string(tok.size()));
  std::vector<double> v;
  v.reserve(tok.size());
  for (auto t : tok) v.push_back(io::parse_double(t));
  return v;
}

}  // namespace

std::string format_logs(const std::vector<RawLog>& logs) {
  std::ostringstream out;
  out << "# flydraw-log pieces=" << logs.size() << "\n";
  for (const RawLog& l : logs) {
    out << "# piece flight=" << l.flight_id << " trajectory=" << l.trajectory_tag
        << " first_tick=" << l.first_tick << " rows=" << l.rows.size() << "\n";
    for (const LogRow& r : l.rows) {
      const auto c = r.current.to_array();
      const auto d = r.desired.to_array();
      bool first = true;
      put_values(out, c.data(), VehicleState::kSize, first);
      put_values(out, d.data(), VehicleState::kSize, first);
      out << "\n";
    }
  }
  return out.str();
}

std::vector<RawLog> parse_logs(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# flydraw-log", 0) != 0) throw FormatError("not a flydraw log file");
  const long pieces = io::parse_long(io::header_value(line, "pieces"));
  std::vector<RawLog> logs;
  for (long p = 0; p < pieces; ++p) {
    if (!std::getline(in, line) || line.rfind("# piece", 0) != 0) throw FormatError("log file truncated: missing piece header");
    RawLog l{io::header_value(line, "flight"), io::header_value(line, "trajectory"),
             io::parse_long(io::header_value(line, "first_tick")), {}};
    const long rows = io::parse_long(io::header_value(line, "rows"));
    for (long r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw FormatError("log file truncated inside piece " + l.flight_id);
      const auto v = row_values(line, 2 * VehicleState::kSize, "log row");
      std::array<double, VehicleState::kSize> c{}, d{};
      std::copy(v.begin(), v.begin() + VehicleState::kSize, c.begin());
      std::copy(v.begin() + VehicleState::kSize, v.end(), d.begin());
      l.rows.push_back({VehicleState::from_array(c), VehicleState::from_array(d)});
    }
    logs.push_back(std::move(l));
  }
  return logs;
}

std::string format_pairs(const PairSet& pairs) {
  std::ostringstream out;
  out << "# flydraw-pairs name=" << pairs.features.name << ' ' << describe(pairs.features)
      << " n=" << pairs.size() << " dim=" << pairs.x.rows() << "\n";
  for (Eigen::Index k = 0; k < pairs.size(); ++k) {
    bool first = true;
    const Eigen::VectorXd xc = pairs.x.col(k);
    const Eigen::VectorXd yc = pairs.y.col(k);
    put_values(out, xc.data(), static_cast<int>(xc.size()), first);
    put_values(out, yc.data(), static_cast<int>(yc.size()), first);
    out << "\n";
  }
  return out.str();
}

PairSet parse_pairs(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# flydraw-pairs", 0) != 0) throw FormatError("not a flydraw pairs file");
  const FeatureConfig cfg = parse_descriptor(line, io::header_value(line, "name"));
  const long n = io::parse_long(io::header_value(line, "n"));
  const long dim = io::parse_long(io::header_value(line, "dim"));
  if (dim != cfg.feature_length())
    throw FormatError("pairs file: dim " + std::to_string(dim) + " does not match " + describe(cfg));
  PairSet out{cfg, Eigen::MatrixXd(dim, n), Eigen::MatrixXd(kOutputs, n)};
  for (long k = 0; k < n; ++k) {
    if (!std::getline(in, line)) throw FormatError("pairs file truncated at pair " + std::to_string(k));
    const auto v = row_values(line, static_cast<std::size_t>(dim + kOutputs), "pair row");
    for (long i = 0; i < dim; ++i) out.x(i, k) = v[i];
    for (int i = 0; i < kOutputs; ++i) out.y(i, k) = v[dim + i];
  }
  return out;
}

}  // namespace flydraw
