#include "flydraw/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "flydraw/errors.hpp"
#include "flydraw/eval.hpp"
#include "flydraw/io.hpp"
#include "flydraw/pipeline.hpp"

namespace flydraw {

namespace fs = std::filesystem;
using nlohmann::json;

struct Service::Session {
  std::string id;
  std::string created;
  DrawnPath path;
  double speed_factor = 1.0;
  std::string config;
  std::optional<DesiredTrajectory> trajectory;
  json summary;
  std::map<std::string, json> results;  // keyed by canonical request
};

struct Service::Model {
  std::string id;
  ReferenceGenerator generator;
  json info;
  std::string digest;
};

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw InvalidInput("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("request body is not valid JSON: ") + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("field '") + key + "': " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json trajectory_json(const DesiredTrajectory& traj) {
  json samples = json::array();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const VehicleState& s = traj[k];
    samples.push_back({{"t", static_cast<double>(k) * kTrajectoryDt},
                       {"p", vec(s.p)},
                       {"v", vec(s.v)},
                       {"euler", vec(s.euler)},
                       {"omega", vec(s.omega)},
                       {"zacc", s.zacc}});
  }
  return {{"rate", kTrajectoryRate},
          {"source", to_string(traj.source())},
          {"duration", traj.duration()},
          {"samples", samples}};
}

json summary_json(const DesiredTrajectory& traj, const MotionBounds& bounds, double factor) {
  const MotionBounds scaled{bounds.v_max * factor, bounds.a_max * factor * factor};
  bool ok = true;
  try {
    validate(traj, scaled);
  } catch (const InvalidInput&) {
    ok = false;
  }
  return {{"samples", traj.size()},
          {"duration", traj.duration()},
          {"max_speed", traj.max_speed()},
          {"max_accel", traj.max_fd_accel()},
          {"v_max", scaled.v_max},
          {"a_max", scaled.a_max},
          {"within_bounds", ok}};
}

json report_json(const ExperimentReport& r) {
  return {{"experiment", r.experiment},   {"trajectory", r.trajectory},   {"config", r.config},
          {"speed_factor", r.speed_factor}, {"seed", r.seed},             {"pulse", r.pulse},
          {"rms_error", r.rms_error},     {"peak_error", r.peak_error},   {"axis_rms", vec(r.axis_rms)},
          {"baseline_rms", r.baseline_rms}, {"improvement", r.improvement}, {"complete", r.complete}};
}

json positions(const FlightLog& log, VehicleState TickRecord::*member) {
  json out = json::array();
  for (const TickRecord& t : log.ticks) out.push_back(vec((t.*member).p));
  return out;
}

DesiredTrajectory plan(const DrawnPath& path, const MotionBounds& bounds, double factor) {
  DrawOptions opts;
  opts.bounds = bounds;
  DesiredTrajectory traj = process_drawn_path(path, opts);
  if (factor != 1.0) traj = rescale_speed(traj, factor);
  return traj;
}

}  // namespace

std::string generator_digest(const ReferenceGenerator& gen) {
  std::string blob = describe(gen.features()) + "\n" +
                     format_normalization(gen.normalizer(), gen.target_scale());
  blob += io::format_double(gen.clip().position) + " " + io::format_double(gen.clip().velocity) +
          (gen.clip().enabled ? " on\n" : " off\n");
  for (const Network& n : gen.nets()) blob += format_model(n);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : blob) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Service::Service(PipelineConfig cfg, std::string snapshot_dir)
    : cfg_(std::move(cfg)), snapshot_dir_(std::move(snapshot_dir)) {
  cfg_.validate();
  if (!snapshot_dir_.empty()) load_snapshot();
}

Service::~Service() = default;

std::string Service::submit_path(const std::string& body) {
  const json req = parse_body(body);
  if (!req.contains("points") || !req.at("points").is_array())
    throw InvalidInput("request needs a 'points' array of [x, z] pairs");
  auto s = std::make_shared<Session>();
  for (const json& p : req.at("points")) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw InvalidInput("each point must be [x, z]");
    s->path.points.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  s->speed_factor = field(req, "speed_factor", 1.0);
  s->config = field<std::string>(req, "config", "future-feedback");
  if (!cfg_.presets.count(s->config)) throw InvalidInput("unknown configuration '" + s->config + "'");
  s->trajectory = plan(s->path, cfg_.bounds, s->speed_factor);
  s->summary = summary_json(*s->trajectory, cfg_.bounds, s->speed_factor);
  s->created = utc_now();
  {
    std::unique_lock lock(mutex_);
    s->id = "s" + std::to_string(next_session_++);
    sessions_[s->id] = s;
  }
  persist_session(*s);
  json resp{{"session", s->id},
            {"trajectory", trajectory_json(*s->trajectory)},
            {"summary", s->summary}};
  return resp.dump();
}

std::shared_ptr<const Service::Model> Service::find_model(const std::string& config,
                                                          const std::string& id) const {
  for (auto it = models_.rbegin(); it != models_.rend(); ++it) {
    if (!id.empty()) {
      if ((*it)->id == id) {
        if ((*it)->generator.features().name != config)
          throw ConfigError("model '" + id + "' was trained for '" + (*it)->generator.features().name + "'");
        return *it;
      }
    } else if ((*it)->generator.features().name == config) {
      return *it;
    }
  }
  if (!id.empty()) throw NotFound("no model '" + id + "'");
  throw ConfigError("no trained generator loaded for '" + config + "'");
}

std::string Service::simulate(const std::string& session_id, const std::string& body) {
  const json req = parse_body(body);
  std::vector<std::string> configs = field(req, "configs", std::vector<std::string>{"baseline"});
  const auto seed = field<std::uint64_t>(req, "seed", cfg_.eval.seed);
  const bool pulse = field(req, "pulse", false);
  const json model_ids = req.contains("models") ? req.at("models") : json::object();

  std::shared_ptr<Session> session;
  GeneratorSet gens;
  std::vector<std::string> order;
  json resolved = json::object();
  {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFound("no session '" + session_id + "'");
    session = it->second;
    for (const std::string& c : configs) {
      if (!cfg_.presets.count(c)) throw InvalidInput("unknown configuration '" + c + "'");
      if (c == "baseline" || !cfg_.presets.at(c)) continue;
      if (std::find(order.begin(), order.end(), c) != order.end()) continue;
      const std::string want = model_ids.contains(c) ? model_ids.at(c).get<std::string>() : "";
      auto m = find_model(c, want);
      gens[c] = &m->generator;
      resolved[c] = m->id;
      order.push_back(c);
    }
  }
  json key_json{{"configs", order}, {"seed", seed}, {"pulse", pulse}, {"models", resolved}};
  const std::string key = key_json.dump();
  {
    std::shared_lock lock(mutex_);
    auto hit = session->results.find(key);
    if (hit != session->results.end()) return hit->second.dump();
  }

  EvalSetup setup{cfg_.plant, cfg_.gains, {}, seed};
  setup.disturbance.pulse = pulse;
  // Models are never removed, so the raw pointers stay valid after unlocking.
  const auto runs = paired_runs("simulate", {session->id, *session->trajectory}, gens, order, setup,
                                session->speed_factor);

  json reports = json::array();
  json traces{{"t", json::array()}, {"desired", positions(runs.front().log, &TickRecord::desired)},
              {"runs", json::object()}};
  for (const TickRecord& t : runs.front().log.ticks) traces["t"].push_back(t.t);
  json improvement = json::object();
  json errors = json::array();
  bool partial = false;
  for (const ExperimentRun& r : runs) {
    reports.push_back(report_json(r.report));
    traces["runs"][r.report.config] = {{"actual", positions(r.log, &TickRecord::current)},
                                       {"reference", positions(r.log, &TickRecord::reference)}};
    if (r.report.config != "baseline") improvement[r.report.config] = r.report.improvement;
    if (!r.log.complete()) {
      partial = true;
      errors.push_back({{"config", r.report.config}, {"error", r.log.error}});
    }
  }
  json resp{{"session", session->id}, {"request", key_json}, {"partial", partial},
            {"errors", errors},       {"reports", reports},   {"improvement", improvement},
            {"traces", traces}};
  {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = session->results.emplace(key, resp);
    if (!inserted) return it->second.dump();
  }
  persist_session(*session);
  return resp.dump();
}

std::string Service::train(const std::string& body) {
  const json req = parse_body(body);
  const std::string name = field<std::string>(req, "config", "future-feedback");
  PipelineConfig c = cfg_;
  c.features(name);
  c.train.seed = field(req, "seed", c.train.seed);
  c.train.iterations = field(req, "iterations", c.train.iterations);
  c.collect.flights = field(req, "flights", c.collect.flights);
  c.collect.base_seed = field(req, "collect_seed", c.collect.base_seed);
  c.sweep.duration = field(req, "sweep_duration", c.sweep.duration);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw InvalidInput(e.what());
  }

  std::lock_guard serial(train_mutex_);
  TrainedGenerator t = train_pipeline(c, name);
  json info{{"config", name},
            {"train_seed", c.train.seed},
            {"iterations", c.train.iterations},
            {"flights", c.collect.flights},
            {"collect_seed", c.collect.base_seed},
            {"sweep_duration", c.sweep.duration},
            {"train_pairs", t.report.train_pairs},
            {"validation_pairs", t.report.validation_pairs},
            {"train_loss", t.report.train_loss}};
  json val = json::array();
  for (double v : t.report.validation_loss) val.push_back(std::isfinite(v) ? json(v) : json());
  info["validation_loss"] = val;
  const std::string id = add_model(t.generator, info.dump());
  std::shared_lock lock(mutex_);
  const auto& m = *std::find_if(models_.begin(), models_.end(), [&](auto& p) { return p->id == id; });
  json resp{{"id", id}, {"digest", m->digest}, {"info", m->info}};
  return resp.dump();
}

std::string Service::add_model(const ReferenceGenerator& gen, const std::string& info_json) {
  json info;
  try {
    info = json::parse(info_json);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model info is not valid JSON: ") + e.what());
  }
  auto m = std::make_shared<Model>(Model{"", gen, info, generator_digest(gen)});
  return store_model(std::move(m));
}

std::string Service::store_model(std::shared_ptr<Model> m) {
  std::unique_lock lock(mutex_);
  const std::string& cname = m->generator.features().name;
  if (m->id.empty()) m->id = cname + "-" + std::to_string(next_model_[cname]++ + 1);
  if (!snapshot_dir_.empty()) {
    const fs::path dir = fs::path(snapshot_dir_) / "models" / m->id;
    if (!fs::exists(dir / "manifest.json")) {
      json extra = m->info;
      extra["id"] = m->id;
      save_bundle(m->generator, dir.string(), extra.dump());
    }
  }
  models_.push_back(m);
  return m->id;
}

std::string Service::list_models() const {
  std::shared_lock lock(mutex_);
  json list = json::array();
  for (const auto& m : models_) {
    const FeatureConfig& f = m->generator.features();
    list.push_back({{"id", m->id},
                    {"config", f.name},
                    {"features", {{"name", f.name}, {"deltas", f.deltas}, {"use_feedback", f.use_feedback},
                                  {"feature_length", f.feature_length()}}},
                    {"digest", m->digest},
                    {"info", m->info}});
  }
  return json{{"models", list}}.dump();
}

namespace {

json session_json(const std::string& id, const std::string& created, const DrawnPath& path,
                  double factor, const std::string& config, const json& summary,
                  const std::optional<DesiredTrajectory>& traj, const std::map<std::string, json>& results) {
  json pts = json::array();
  for (const auto& p : path.points) pts.push_back({p.x(), p.y()});
  json res = json::array();
  for (const auto& [k, v] : results) res.push_back(v);
  json out{{"id", id},         {"created", created}, {"points", pts}, {"speed_factor", factor},
           {"config", config}, {"summary", summary}, {"results", res}};
  if (traj) out["trajectory"] = trajectory_json(*traj);
  return out;
}

}  // namespace

std::string Service::get_session(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("no session '" + id + "'");
  const Session& s = *it->second;
  return session_json(s.id, s.created, s.path, s.speed_factor, s.config, s.summary, s.trajectory, s.results)
      .dump();
}

void Service::persist_session(const Session& s) const {
  if (snapshot_dir_.empty()) return;
  json doc;
  {
    std::shared_lock lock(mutex_);
    doc = session_json(s.id, s.created, s.path, s.speed_factor, s.config, s.summary, std::nullopt, s.results);
  }
  const fs::path dir = fs::path(snapshot_dir_) / "sessions";
  fs::create_directories(dir);
  io::write_file((dir / (s.id + ".json")).string(), doc.dump(1) + "\n");
}

void Service::load_snapshot() {
  const fs::path root(snapshot_dir_);
  fs::create_directories(root / "sessions");
  fs::create_directories(root / "models");

  std::vector<fs::path> model_dirs;
  for (const auto& e : fs::directory_iterator(root / "models"))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) model_dirs.push_back(e.path());
  std::sort(model_dirs.begin(), model_dirs.end());
  for (const fs::path& d : model_dirs) {
    const json manifest = json::parse(io::read_file((d / "manifest.json").string()));
    json info = manifest.value("info", json::object());
    const std::string id = info.value("id", d.filename().string());
    info.erase("id");
    ReferenceGenerator gen = load_bundle(d.string());
    const std::string cname = gen.features().name;
    const std::string prefix = cname + "-";
    if (id.rfind(prefix, 0) == 0) {
      try {
        next_model_[cname] = std::max(next_model_[cname], io::parse_long(id.substr(prefix.size())));
      } catch (const FormatError&) {
      }
    }
    auto m = std::make_shared<Model>(Model{id, gen, info, generator_digest(gen)});
    models_.push_back(std::move(m));
  }

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root / "sessions"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    const json doc = json::parse(io::read_file(f.string()));
    auto s = std::make_shared<Session>();
    s->id = doc.at("id").get<std::string>();
    s->created = doc.value("created", "");
    for (const json& p : doc.at("points")) s->path.points.emplace_back(p[0].get<double>(), p[1].get<double>());
    s->speed_factor = doc.value("speed_factor", 1.0);
    s->config = doc.value("config", "future-feedback");
    s->summary = doc.value("summary", json::object());
    s->trajectory = plan(s->path, cfg_.bounds, s->speed_factor);
    for (const json& r : doc.value("results", json::array())) s->results[r.at("request").dump()] = r;
    if (s->id.size() > 1 && s->id[0] == 's') {
      try {
        next_session_ = std::max(next_session_, io::parse_long(s->id.substr(1)) + 1);
      } catch (const FormatError&) {
      }
    }
    sessions_[s->id] = s;
  }
}

}  // namespace flydraw
