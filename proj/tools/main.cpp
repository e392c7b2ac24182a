#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "flydraw/config.hpp"
#include "flydraw/dataset.hpp"
#include "flydraw/errors.hpp"
#include "flydraw/eval.hpp"
#include "flydraw/io.hpp"
#include "flydraw/pipeline.hpp"
#include "flydraw/server.hpp"
#include "flydraw/service.hpp"
#include "flydraw/testset.hpp"

#include "CLI11.hpp"
#include "json.hpp"

using namespace flydraw;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_file;
  std::string store = "flydraw-store";
};

PipelineConfig load(const Globals& g) {
  return g.config_file.empty() ? PipelineConfig{} : load_config(g.config_file);
}

int print_json(const std::string& body) {
  std::cout << json::parse(body).dump(2) << "\n";
  return 0;
}

json read_points(const std::string& file) {
  const std::string text = io::read_file(file);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    json j = json::parse(text);
    return j.is_object() ? j.at("points") : j;
  }
  json pts = json::array();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = io::split_ws(line);
    if (f.size() != 2) throw FormatError("points file: expected 'x z' per line");
    pts.push_back({io::parse_double(f[0]), io::parse_double(f[1])});
  }
  return pts;
}

void print_summary(const std::string& title, const std::vector<ExperimentReport>& reports) {
  std::printf("%s\n", title.c_str());
  std::printf("  %-20s %5s %10s %12s %9s\n", "config", "runs", "mean_rms", "improvement", "improved");
  for (const ConfigSummary& s : summarize(reports))
    std::printf("  %-20s %5d %10.4f %11.1f%% %8.0f%%\n", s.config.c_str(), s.runs, s.mean_rms,
                s.mean_improvement, 100.0 * s.fraction_improved);
}

// Bundles given as NAME=DIR are loaded; the rest are trained from one shared
// set of baseline logs and optionally saved under save_dir/NAME.
class Generators {
public:
  Generators(const PipelineConfig& cfg, const std::vector<std::string>& bundle_args, std::string save_dir)
      : cfg_(cfg), save_dir_(std::move(save_dir)) {
    for (const std::string& a : bundle_args) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw InvalidInput("--bundle expects NAME=DIR, got '" + a + "'");
      bundles_[a.substr(0, eq)] = a.substr(eq + 1);
    }
  }

  const ReferenceGenerator& get(const std::string& name) {
    auto it = loaded_.find(name);
    if (it != loaded_.end()) return it->second;
    if (bundles_.count(name)) {
      ReferenceGenerator g = load_bundle(bundles_.at(name));
      if (g.features().name != name)
        throw ConfigError("bundle " + bundles_.at(name) + " holds '" + g.features().name + "', not '" + name + "'");
      return loaded_.emplace(name, std::move(g)).first->second;
    }
    if (!logs_) {
      std::fprintf(stderr, "collecting baseline flights on the training sweep\n");
      logs_ = collect_training_logs(cfg_);
    }
    std::fprintf(stderr, "training '%s'\n", name.c_str());
    TrainedGenerator t = train_from_logs(*logs_, cfg_, name);
    if (!save_dir_.empty()) {
      json info{{"train_seed", cfg_.train.seed}, {"iterations", cfg_.train.iterations}};
      save_bundle(t.generator, (fs::path(save_dir_) / name).string(), info.dump());
    }
    return loaded_.emplace(name, std::move(t.generator)).first->second;
  }

  GeneratorSet set(const std::vector<std::string>& names) {
    GeneratorSet out;
    for (const std::string& n : names) out[n] = &get(n);
    return out;
  }

private:
  PipelineConfig cfg_;
  std::string save_dir_;
  std::map<std::string, std::string> bundles_;
  std::map<std::string, ReferenceGenerator> loaded_;
  std::optional<std::vector<RawLog>> logs_;
};

EvalSetup setup_of(const PipelineConfig& cfg) {
  EvalSetup s;
  s.plant = cfg.plant;
  s.gains = cfg.gains;
  s.seed = cfg.eval.seed;
  return s;
}

NamedTrajectory bundled_trajectory(const std::string& name, const PipelineConfig& cfg) {
  DrawOptions o;
  o.bounds = cfg.bounds;
  return {name, process_drawn_path(bundled_path(name).path, o)};
}

std::vector<NamedTrajectory> test_set(const PipelineConfig& cfg) {
  std::vector<NamedTrajectory> out;
  for (const NamedPath& p : bundled_test_paths()) out.push_back(bundled_trajectory(p.name, cfg));
  return out;
}

void write_outputs(const std::vector<ExperimentRun>& runs, const std::string& out) {
  if (out.empty()) return;
  emit_report(runs, out);
  std::fprintf(stderr, "wrote %s/reports.csv\n", out.c_str());
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const PipelineFailure& e) {
    std::fprintf(stderr, "error: pipeline stage %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned reference pre-block for a simulated quadrotor"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_file, "Configuration file (JSON)")->check(CLI::ExistingFile);
  std::function<int()> action;

  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration");
  config_cmd->callback([&] { action = [&] { std::cout << format_config(load(g)); return 0; }; });

  // Service verbs: mirror the HTTP endpoints against a snapshot store.
  std::string points_file, bundled, generator = "future-feedback";
  double speed_factor = 1.0;
  auto* submit = app.add_subcommand("submit-path", "POST /paths: process a drawn path into a session");
  auto* src = submit->add_option_group("source");
  src->add_option("--points", points_file, "JSON or 'x z' lines (m)")->check(CLI::ExistingFile);
  src->add_option("--bundled", bundled, "Name of a bundled test path");
  src->require_option(1);
  submit->add_option("--speed-factor", speed_factor);
  submit->add_option("--generator", generator, "Generator configuration recorded with the session");
  submit->add_option("--store", g.store, "Snapshot directory");
  submit->callback([&] {
    action = [&] {
      Service svc(load(g), g.store);
      json pts = json::array();
      if (!bundled.empty()) {
        for (const auto& p : bundled_path(bundled).path.points) pts.push_back({p.x(), p.y()});
      } else {
        pts = read_points(points_file);
      }
      const json resp = json::parse(svc.submit_path(
          json{{"points", pts}, {"speed_factor", speed_factor}, {"config", generator}}.dump()));
      std::cout << json{{"session", resp.at("session")}, {"summary", resp.at("summary")}}.dump(2) << "\n";
      return 0;
    };
  });

  std::string session_id;
  std::vector<std::string> configs{"baseline"}, model_args;
  std::uint64_t sim_seed = 0;
  bool pulse = false, full = false;
  auto* simulate = app.add_subcommand("simulate", "POST /sessions/{id}/simulate");
  simulate->add_option("session", session_id)->required();
  simulate->add_option("--configs", configs, "Configurations to fly")->delimiter(',');
  simulate->add_option("--seed", sim_seed);
  simulate->add_flag("--pulse", pulse, "Apply the seeded force pulse");
  simulate->add_option("--model", model_args, "CONFIG=MODEL_ID");
  simulate->add_flag("--traces", full, "Include traces in the output");
  simulate->add_option("--store", g.store);
  simulate->callback([&] {
    action = [&] {
      Service svc(load(g), g.store);
      json models = json::object();
      for (const std::string& m : model_args) {
        const auto eq = m.find('=');
        if (eq == std::string::npos) throw InvalidInput("--model expects CONFIG=MODEL_ID");
        models[m.substr(0, eq)] = m.substr(eq + 1);
      }
      json resp = json::parse(svc.simulate(
          session_id, json{{"configs", configs}, {"seed", sim_seed}, {"pulse", pulse}, {"models", models}}.dump()));
      if (!full) resp.erase("traces");
      std::cout << resp.dump(2) << "\n";
      return 0;
    };
  });

  auto* session = app.add_subcommand("session", "GET /sessions/{id}");
  session->add_option("session", session_id)->required();
  session->add_option("--store", g.store);
  session->callback([&] { action = [&] { return print_json(Service(load(g), g.store).get_session(session_id)); }; });

  auto* models = app.add_subcommand("models", "GET /models");
  models->add_option("--store", g.store);
  models->callback([&] { action = [&] { return print_json(Service(load(g), g.store).list_models()); }; });

  std::optional<std::uint64_t> train_seed;
  std::optional<int> iterations, flights;
  std::optional<double> sweep_duration;
  auto* train = app.add_subcommand("train", "POST /train: collect, build pairs, split, train, store");
  train->add_option("--generator", generator);
  train->add_option("--seed", train_seed);
  train->add_option("--iterations", iterations);
  train->add_option("--flights", flights);
  train->add_option("--sweep-duration", sweep_duration);
  train->add_option("--store", g.store);
  train->callback([&] {
    action = [&] {
      Service svc(load(g), g.store);
      json body{{"config", generator}};
      if (train_seed) body["seed"] = *train_seed;
      if (iterations) body["iterations"] = *iterations;
      if (flights) body["flights"] = *flights;
      if (sweep_duration) body["sweep_duration"] = *sweep_duration;
      return print_json(svc.train(body.dump()));
    };
  });

  std::string out, logs_file;
  auto* collect = app.add_subcommand("collect", "Fly the baseline on the training sweep and write logs");
  collect->add_option("-o,--out", out)->required();
  collect->callback([&] {
    action = [&] {
      const auto logs = collect_training_logs(load(g));
      io::write_file(out, format_logs(logs));
      std::fprintf(stderr, "%zu pieces, %zu rows -> %s\n", logs.size(), total_rows(logs), out.c_str());
      return 0;
    };
  });

  auto* pairs = app.add_subcommand("build-pairs", "Turn logs into training pairs");
  pairs->add_option("--logs", logs_file)->required()->check(CLI::ExistingFile);
  pairs->add_option("--generator", generator);
  pairs->add_option("-o,--out", out)->required();
  pairs->callback([&] {
    action = [&] {
      const PipelineConfig cfg = load(g);
      const PairSet p = build_pairs(parse_logs(io::read_file(logs_file)), cfg.features(generator));
      io::write_file(out, format_pairs(p));
      std::fprintf(stderr, "%ld pairs (%s) -> %s\n", static_cast<long>(p.size()),
                   describe(p.features).c_str(), out.c_str());
      return 0;
    };
  });

  std::vector<std::string> bundle_args;
  std::string save_dir;
  auto add_generator_options = [&](CLI::App* cmd) {
    cmd->add_option("--bundle", bundle_args, "NAME=DIR of a saved generator; others are trained");
    cmd->add_option("--save-bundles", save_dir, "Save trained generators under DIR/NAME");
    cmd->add_option("-o,--out", out, "Write reports.csv and traces here");
  };

  auto* evaluate = app.add_subcommand("evaluate", "One generator vs the baseline on the test set");
  evaluate->add_option("--generator", generator);
  add_generator_options(evaluate);
  evaluate->callback([&] {
    action = [&] {
      const PipelineConfig cfg = load(g);
      Generators gens(cfg, bundle_args, save_dir);
      const GeneratorSet set = gens.set({generator});
      std::vector<ExperimentRun> runs;
      for (const NamedTrajectory& t : test_set(cfg)) {
        auto r = paired_runs("evaluate", t, set, {generator}, setup_of(cfg));
        std::move(r.begin(), r.end(), std::back_inserter(runs));
      }
      print_summary("bundled test set", reports_of(runs));
      if (cfg.collect.holdout) {
        auto r = paired_runs("self-test", holdout_segment(cfg), set, {generator}, setup_of(cfg));
        print_summary("held-out sweep segment", reports_of(r));
        std::move(r.begin(), r.end(), std::back_inserter(runs));
      }
      write_outputs(runs, out);
      return 0;
    };
  });

  auto* ablate = app.add_subcommand("ablate", "Future-state and feedback ablations");
  add_generator_options(ablate);
  ablate->callback([&] {
    action = [&] {
      const PipelineConfig cfg = load(g);
      Generators gens(cfg, bundle_args, save_dir);
      const GeneratorSet set = gens.set({"no-future", "future-no-feedback", "future-feedback"});
      auto runs = ablation_suite(test_set(cfg), set, setup_of(cfg));
      print_summary("bundled test set", reports_of(runs));
      const auto dist = disturbance_suite(bundled_trajectory(cfg.eval.disturbance_path, cfg), set,
                                          setup_of(cfg), cfg.eval.pulse_seeds);
      print_summary("force pulse on " + cfg.eval.disturbance_path, reports_of(dist));
      runs.insert(runs.end(), dist.begin(), dist.end());
      write_outputs(runs, out);
      return 0;
    };
  });

  auto* sweep = app.add_subcommand("speed-sweep", "Improvement across speed factors");
  sweep->add_option("--generator", generator);
  add_generator_options(sweep);
  sweep->callback([&] {
    action = [&] {
      const PipelineConfig cfg = load(g);
      Generators gens(cfg, bundle_args, save_dir);
      const auto runs = speed_sweep(bundled_trajectory(cfg.eval.speed_sweep_path, cfg), cfg.eval.speed_factors,
                                    gens.get(generator), setup_of(cfg));
      std::printf("%8s %10s %10s %12s\n", "factor", "baseline", generator.c_str(), "improvement");
      for (std::size_t i = 0; i + 1 < runs.size(); i += 2)
        std::printf("%8.2f %10.4f %10.4f %11.1f%%\n", runs[i].report.speed_factor, runs[i].report.rms_error,
                    runs[i + 1].report.rms_error, runs[i + 1].report.improvement);
      write_outputs(runs, out);
      return 0;
    };
  });

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--store", g.store, "Snapshot directory (empty for memory only)");
  serve->callback([&] {
    action = [&] {
      Service svc(load(g), g.store);
      ApiServer server(svc);
      const int bound = server.bind(host, port);
      if (bound < 0) throw InvalidInput("cannot bind " + host + ":" + std::to_string(port));
      std::fprintf(stderr, "listening on http://%s:%d\n", host.c_str(), bound);
      return server.serve() ? 0 : 1;
    };
  });

  CLI11_PARSE(app, argc, argv);
  return guarded(action);
}
