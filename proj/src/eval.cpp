#include "flydraw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"
#include "flydraw/testset.hpp"

namespace flydraw {

namespace fs = std::filesystem;

namespace {

void require_ticks(const FlightLog& log) {
  if (log.ticks.empty()) throw InvalidInput("flight log has no samples");
}

}  // namespace

double rms_error(const FlightLog& log) {
  require_ticks(log);
  double sum = 0.0;
  for (const TickRecord& r : log.ticks) sum += (r.current.p - r.desired.p).squaredNorm();
  return std::sqrt(sum / static_cast<double>(log.ticks.size()));
}

double peak_error(const FlightLog& log) {
  require_ticks(log);
  double peak = 0.0;
  for (const TickRecord& r : log.ticks) peak = std::max(peak, (r.current.p - r.desired.p).norm());
  return peak;
}

Vec3 axis_rms_error(const FlightLog& log) {
  require_ticks(log);
  Vec3 sum = Vec3::Zero();
  for (const TickRecord& r : log.ticks) sum += (r.current.p - r.desired.p).cwiseAbs2();
  return (sum / static_cast<double>(log.ticks.size())).cwiseSqrt();
}

double improvement(double e_dnn, double e_base) {
  if (!(e_base > 0.0)) throw InvalidInput("improvement is undefined for a baseline error of " +
                                          io::format_double(e_base));
  return (1.0 - e_dnn / e_base) * 100.0;
}

std::vector<ExperimentRun> paired_runs(const std::string& experiment, const NamedTrajectory& traj,
                                       const GeneratorSet& generators,
                                       const std::vector<std::string>& order, const EvalSetup& setup,
                                       double speed_factor) {
  LoopOptions lo;
  lo.disturbance = setup.disturbance;
  lo.seed = setup.seed;

  auto run = [&](const std::string& config, const ReferenceGenerator* gen) {
    ExperimentRun r;
    r.log = run_closed_loop(traj.trajectory, setup.gains, setup.plant, gen, lo);
    r.log.generator_tag = config;
    ExperimentReport& rep = r.report;
    rep.experiment = experiment;
    rep.trajectory = traj.name;
    rep.config = config;
    rep.speed_factor = speed_factor;
    rep.seed = setup.seed;
    rep.pulse = setup.disturbance.pulse;
    rep.rms_error = rms_error(r.log);
    rep.peak_error = peak_error(r.log);
    rep.axis_rms = axis_rms_error(r.log);
    rep.complete = r.log.complete();
    return r;
  };

  std::vector<ExperimentRun> out;
  out.push_back(run("baseline", nullptr));
  const double base = out.front().report.rms_error;
  out.front().report.baseline_rms = base;
  for (const std::string& name : order) {
    auto it = generators.find(name);
    if (it == generators.end() || it->second == nullptr)
      throw ConfigError("no generator bundle loaded for configuration '" + name + "'");
    ExperimentRun r = run(name, it->second);
    r.report.baseline_rms = base;
    r.report.improvement = improvement(r.report.rms_error, base);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRun> ablation_suite(const std::vector<NamedTrajectory>& trajectories,
                                          const GeneratorSet& generators, const EvalSetup& setup) {
  const std::vector<std::string> order{"no-future", "future-no-feedback", "future-feedback"};
  for (const std::string& name : order)
    if (!generators.count(name) || generators.at(name) == nullptr)
      throw ConfigError("ablation needs a generator bundle for '" + name + "'");
  std::vector<ExperimentRun> out;
  for (const NamedTrajectory& t : trajectories) {
    auto rows = paired_runs("ablation", t, generators, order, setup);
    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<ExperimentRun> disturbance_suite(const NamedTrajectory& traj, const GeneratorSet& generators,
                                             const EvalSetup& setup,
                                             const std::vector<std::uint64_t>& pulse_seeds) {
  const std::vector<std::string> order{"future-no-feedback", "future-feedback"};
  for (const std::string& name : order)
    if (!generators.count(name) || generators.at(name) == nullptr)
      throw ConfigError("disturbance ablation needs a generator bundle for '" + name + "'");
  std::vector<ExperimentRun> out;
  for (std::uint64_t seed : pulse_seeds) {
    EvalSetup s = setup;
    s.disturbance.pulse = true;
    s.seed = seed;
    auto rows = paired_runs("disturbance", traj, generators, order, s);
    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<ExperimentRun> speed_sweep(const NamedTrajectory& traj, const std::vector<double>& factors,
                                       const ReferenceGenerator& generator, const EvalSetup& setup) {
  const GeneratorSet gens{{generator.features().name, &generator}};
  std::vector<ExperimentRun> out;
  for (double f : factors) {
    const NamedTrajectory scaled{traj.name, rescale_speed(traj.trajectory, f)};
    auto rows = paired_runs("speed-sweep", scaled, gens, {generator.features().name}, setup, f);
    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<ConfigSummary> summarize(const std::vector<ExperimentReport>& reports) {
  std::vector<ConfigSummary> out;
  for (const ExperimentReport& r : reports) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ConfigSummary& s) { return s.config == r.config; });
    if (it == out.end()) {
      out.push_back({r.config});
      it = out.end() - 1;
    }
    ++it->runs;
    it->mean_rms += r.rms_error;
    it->mean_improvement += r.improvement;
    it->fraction_improved += r.improvement > 0.0 ? 1.0 : 0.0;
  }
  for (ConfigSummary& s : out) {
    s.mean_rms /= s.runs;
    s.mean_improvement /= s.runs;
    s.fraction_improved /= s.runs;
  }
  return out;
}

std::vector<NamedTrajectory> bundled_test_trajectories() {
  std::vector<NamedTrajectory> out;
  for (const NamedPath& p : bundled_test_paths()) out.push_back({p.name, process_drawn_path(p.path)});
  return out;
}

std::vector<ExperimentReport> reports_of(const std::vector<ExperimentRun>& runs) {
  std::vector<ExperimentReport> out;
  for (const ExperimentRun& r : runs) out.push_back(r.report);
  return out;
}

const std::vector<std::string> kReportColumns{
    "experiment", "trajectory", "config",  "speed_factor", "seed",         "pulse",       "rms_error",
    "peak_error", "rms_x",      "rms_y",   "rms_z",        "baseline_rms", "improvement", "complete"};

std::string format_report_csv(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kReportColumns.size(); ++i) out << (i ? "," : "") << kReportColumns[i];
  out << "\n";
  auto num = [](double v) { return io::format_double(v); };
  for (const ExperimentReport& r : reports) {
    for (const std::string* s : {&r.experiment, &r.trajectory, &r.config})
      if (s->find_first_of(",\n\"") != std::string::npos)
        throw InvalidInput("report field contains a CSV delimiter: " + *s);
    out << r.experiment << ',' << r.trajectory << ',' << r.config << ',' << num(r.speed_factor) << ','
        << r.seed << ',' << (r.pulse ? 1 : 0) << ',' << num(r.rms_error) << ',' << num(r.peak_error) << ','
        << num(r.axis_rms.x()) << ',' << num(r.axis_rms.y()) << ',' << num(r.axis_rms.z()) << ','
        << num(r.baseline_rms) << ',' << num(r.improvement) << ',' << (r.complete ? 1 : 0) << "\n";
  }
  return out.str();
}

std::vector<ExperimentReport> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("report CSV is empty");
  const auto header = io::split(line, ',');
  if (header.size() != kReportColumns.size() ||
      !std::equal(header.begin(), header.end(), kReportColumns.begin()))
    throw FormatError("report CSV header does not match the schema");
  std::vector<ExperimentReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != kReportColumns.size()) throw FormatError("report CSV row has the wrong field count");
    ExperimentReport r;
    r.experiment = std::string(f[0]);
    r.trajectory = std::string(f[1]);
    r.config = std::string(f[2]);
    r.speed_factor = io::parse_double(f[3]);
    r.seed = static_cast<std::uint64_t>(io::parse_long(f[4]));
    r.pulse = io::parse_long(f[5]) != 0;
    r.rms_error = io::parse_double(f[6]);
    r.peak_error = io::parse_double(f[7]);
    r.axis_rms = Vec3(io::parse_double(f[8]), io::parse_double(f[9]), io::parse_double(f[10]));
    r.baseline_rms = io::parse_double(f[11]);
    r.improvement = io::parse_double(f[12]);
    r.complete = io::parse_long(f[13]) != 0;
    out.push_back(std::move(r));
  }
  return out;
}

void emit_report(const std::vector<ExperimentRun>& runs, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "traces");
  io::write_file((fs::path(dir) / "reports.csv").string(), format_report_csv(reports_of(runs)));
  for (const ExperimentRun& run : runs) {
    const ExperimentReport& r = run.report;
    const std::string stem = r.experiment + "_" + r.trajectory + "_" + r.config + "_x" +
                             io::format_double(r.speed_factor) + "_s" + std::to_string(r.seed);
    std::vector<VehicleState> desired, actual, reference;
    for (const TickRecord& t : run.log.ticks) {
      desired.push_back(t.desired);
      actual.push_back(t.current);
      reference.push_back(t.reference);
    }
    const fs::path base = fs::path(dir) / "traces" / stem;
    io::write_file(base.string() + ".desired.txt", format_state_series(desired, "desired"));
    io::write_file(base.string() + ".actual.txt", format_state_series(actual, "actual"));
    io::write_file(base.string() + ".reference.txt", format_state_series(reference, "reference"));
  }
}

}  // namespace flydraw
