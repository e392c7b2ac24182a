#include "flydraw/config.hpp"

#include "json.hpp"

#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"

namespace flydraw {

using nlohmann::json;

const FeatureConfig& PipelineConfig::features(const std::string& name) const {
  auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown generator configuration '" + name + "'");
  if (!it->second) throw ConfigError("configuration '" + name + "' has no generator");
  return *it->second;
}

void PipelineConfig::validate() const {
  plant.validate();
  gains.validate();
  train.validate();
  if (!(split_ratio > 0.0 && split_ratio <= 1.0)) throw ConfigError("split_ratio must be in (0, 1]");
  if (collect.flights < 1) throw ConfigError("collect.flights must be >= 1");
  for (const auto& [name, f] : presets)
    if (f) f->validate();
  if (eval.pulse_seeds.empty()) throw ConfigError("evaluation.pulse_seeds must not be empty");
}

namespace {

// Reads fields from one JSON object, rejecting keys nobody asked for.
class Section {
public:
  Section(const json& parent, const char* name) : name_(name) {
    if (parent.contains(name)) {
      obj_ = &parent.at(name);
      if (!obj_->is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void get(const char* key, Vec3& out) {
    std::array<double, 3> a{out.x(), out.y(), out.z()};
    get(key, a);
    out = Vec3(a[0], a[1], a[2]);
  }

  const json* raw(const char* key) {
    seen_.push_back(key);
    return obj_ && obj_->contains(key) ? &obj_->at(key) : nullptr;
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
        throw ConfigError("unknown config key '" + name_ + "." + k + "'");
  }

private:
  std::string name_;
  const json* obj_ = nullptr;
  std::vector<std::string> seen_;
};

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> sections{"plant", "controller", "train", "sweep", "collect",
                                                 "split", "clip", "bounds", "evaluation", "features"};
  for (const auto& [k, v] : doc.items())
    if (std::find(sections.begin(), sections.end(), k) == sections.end())
      throw ConfigError("unknown config section '" + k + "'");

  PipelineConfig cfg;
  {
    Section s(doc, "plant");
    PlantConfig& p = cfg.plant;
    s.get("mass", p.mass);
    s.get("inertia", p.inertia);
    s.get("arm_length", p.arm_length);
    s.get("yaw_moment_coeff", p.yaw_moment_coeff);
    s.get("gravity", p.gravity);
    s.get("drag_coeff", p.drag_coeff);
    s.get("motor_time_constant", p.motor_time_constant);
    s.get("command_delay_steps", p.command_delay_steps);
    s.get("thrust_min", p.thrust_limits.min);
    s.get("thrust_max", p.thrust_limits.max);
    s.get("k_att", p.onboard.k_att);
    s.get("k_rate", p.onboard.k_rate);
    s.get("k_yaw_rate", p.onboard.k_yaw_rate);
    s.get("k_zvel", p.onboard.k_zvel);
    s.finish();
  }
  {
    Section s(doc, "controller");
    ControllerGains& g = cfg.gains;
    s.get("kp_pos", g.kp_pos);
    s.get("kd_pos", g.kd_pos);
    s.get("kp_z_vel", g.kp_z_vel);
    s.get("kp_yaw", g.kp_yaw);
    s.get("accel_limit", g.accel_limit);
    s.get("gravity", g.gravity);
    s.get("max_tilt", g.cmd_saturation.max_tilt);
    s.get("max_yaw_rate", g.cmd_saturation.max_yaw_rate);
    s.get("max_zvel", g.cmd_saturation.max_zvel);
    s.finish();
  }
  {
    Section s(doc, "train");
    TrainConfig& t = cfg.train;
    s.get("learning_rate", t.learning_rate);
    s.get("dropout_keep", t.dropout_keep);
    s.get("dropout_layers", t.dropout_layers);
    s.get("batch_size", t.batch_size);
    s.get("iterations", t.iterations);
    s.get("seed", t.seed);
    s.finish();
  }
  {
    Section s(doc, "sweep");
    s.get("duration", cfg.sweep.duration);
    s.get("freqs", cfg.sweep.freqs);
    s.get("amp_max", cfg.sweep.amp_max);
    s.get("z_floor", cfg.sweep.z_floor);
    s.finish();
  }
  {
    Section s(doc, "collect");
    CollectOptions& c = cfg.collect;
    s.get("flights", c.flights);
    s.get("base_seed", c.base_seed);
    s.get("wind_std", c.disturbance.wind_std);
    s.get("wind_tau", c.disturbance.wind_tau);
    s.get("trim_seconds", c.trim_seconds);
    if (const json* h = s.raw("holdout")) {
      if (h->is_null()) {
        c.holdout.reset();
      } else {
        auto w = h->get<std::array<double, 2>>();
        c.holdout = std::make_pair(w[0], w[1]);
      }
    }
    s.finish();
  }
  {
    Section s(doc, "split");
    s.get("ratio", cfg.split_ratio);
    s.get("seed", cfg.split_seed);
    s.finish();
  }
  {
    Section s(doc, "clip");
    s.get("enabled", cfg.clip.enabled);
    s.get("position", cfg.clip.position);
    s.get("velocity", cfg.clip.velocity);
    s.finish();
  }
  {
    Section s(doc, "bounds");
    s.get("v_max", cfg.bounds.v_max);
    s.get("a_max", cfg.bounds.a_max);
    s.finish();
  }
  {
    Section s(doc, "evaluation");
    EvalSettings& e = cfg.eval;
    s.get("seed", e.seed);
    s.get("pulse_seeds", e.pulse_seeds);
    s.get("speed_factors", e.speed_factors);
    s.get("speed_sweep_path", e.speed_sweep_path);
    s.get("disturbance_path", e.disturbance_path);
    s.finish();
  }
  if (doc.contains("features")) {
    const json& f = doc.at("features");
    if (!f.is_object()) throw ConfigError("config section 'features' must be an object");
    for (const auto& [name, v] : f.items()) {
      if (v.is_null()) {
        cfg.presets[name] = std::nullopt;
        continue;
      }
      FeatureConfig fc;
      fc.name = name;
      try {
        fc.deltas = v.at("deltas").get<std::vector<int>>();
        fc.use_feedback = v.at("use_feedback").get<bool>();
      } catch (const json::exception& e) {
        throw ConfigError("features." + name + ": " + e.what());
      }
      cfg.presets[name] = fc;
    }
  }
  cfg.validate();
  return cfg;
}

std::string format_config(const PipelineConfig& cfg) {
  json doc;
  const PlantConfig& p = cfg.plant;
  doc["plant"] = {{"mass", p.mass},
                  {"inertia", vec(p.inertia)},
                  {"arm_length", p.arm_length},
                  {"yaw_moment_coeff", p.yaw_moment_coeff},
                  {"gravity", p.gravity},
                  {"drag_coeff", vec(p.drag_coeff)},
                  {"motor_time_constant", p.motor_time_constant},
                  {"command_delay_steps", p.command_delay_steps},
                  {"thrust_min", p.thrust_limits.min},
                  {"thrust_max", p.thrust_limits.max},
                  {"k_att", p.onboard.k_att},
                  {"k_rate", p.onboard.k_rate},
                  {"k_yaw_rate", p.onboard.k_yaw_rate},
                  {"k_zvel", p.onboard.k_zvel}};
  const ControllerGains& g = cfg.gains;
  doc["controller"] = {{"kp_pos", vec(g.kp_pos)},
                       {"kd_pos", vec(g.kd_pos)},
                       {"kp_z_vel", g.kp_z_vel},
                       {"kp_yaw", g.kp_yaw},
                       {"accel_limit", g.accel_limit},
                       {"gravity", g.gravity},
                       {"max_tilt", g.cmd_saturation.max_tilt},
                       {"max_yaw_rate", g.cmd_saturation.max_yaw_rate},
                       {"max_zvel", g.cmd_saturation.max_zvel}};
  const TrainConfig& t = cfg.train;
  doc["train"] = {{"learning_rate", t.learning_rate}, {"dropout_keep", t.dropout_keep},
                  {"dropout_layers", t.dropout_layers}, {"batch_size", t.batch_size},
                  {"iterations", t.iterations}, {"seed", t.seed}};
  doc["sweep"] = {{"duration", cfg.sweep.duration},
                  {"freqs", vec(cfg.sweep.freqs)},
                  {"amp_max", cfg.sweep.amp_max},
                  {"z_floor", cfg.sweep.z_floor}};
  const CollectOptions& c = cfg.collect;
  doc["collect"] = {{"flights", c.flights},
                    {"base_seed", c.base_seed},
                    {"wind_std", c.disturbance.wind_std},
                    {"wind_tau", c.disturbance.wind_tau},
                    {"trim_seconds", c.trim_seconds},
                    {"holdout", c.holdout ? json::array({c.holdout->first, c.holdout->second}) : json()}};
  doc["split"] = {{"ratio", cfg.split_ratio}, {"seed", cfg.split_seed}};
  doc["clip"] = {{"enabled", cfg.clip.enabled}, {"position", cfg.clip.position}, {"velocity", cfg.clip.velocity}};
  doc["bounds"] = {{"v_max", cfg.bounds.v_max}, {"a_max", cfg.bounds.a_max}};
  const EvalSettings& e = cfg.eval;
  doc["evaluation"] = {{"seed", e.seed},
                       {"pulse_seeds", e.pulse_seeds},
                       {"speed_factors", e.speed_factors},
                       {"speed_sweep_path", e.speed_sweep_path},
                       {"disturbance_path", e.disturbance_path}};
  json f = json::object();
  for (const auto& [name, fc] : cfg.presets) {
    if (!fc) {
      f[name] = nullptr;
    } else {
      f[name] = {{"deltas", fc->deltas}, {"use_feedback", fc->use_feedback}};
    }
  }
  doc["features"] = f;
  return doc.dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) { return parse_config(io::read_file(path)); }

}  // namespace flydraw
