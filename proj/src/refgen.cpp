#include "flydraw/refgen.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"

namespace flydraw {

namespace fs = std::filesystem;
using nlohmann::json;

void FeatureConfig::validate() const {
  if (deltas.empty()) throw ConfigError("feature config '" + name + "': at least one selected state");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] < 0) throw ConfigError("feature config '" + name + "': negative delta");
    if (i > 0 && deltas[i] <= deltas[i - 1])
      throw ConfigError("feature config '" + name + "': deltas must be strictly increasing");
  }
}

std::string describe(const FeatureConfig& cfg) {
  std::string out = "L=" + std::to_string(cfg.count()) + " deltas=";
  for (std::size_t i = 0; i < cfg.deltas.size(); ++i)
    out += (i ? "," : "") + std::to_string(cfg.deltas[i]);
  out += std::string(" feedback=") + (cfg.use_feedback ? "1" : "0");
  return out;
}

FeatureConfig parse_descriptor(const std::string& text, const std::string& name) {
  FeatureConfig cfg;
  cfg.name = name;
  cfg.deltas.clear();
  const std::string l = io::header_value(text, "L");
  const std::string d = io::header_value(text, "deltas");
  const std::string f = io::header_value(text, "feedback");
  if (l.empty() || d.empty() || f.empty())
    throw FormatError("feature descriptor needs L, deltas and feedback: '" + text + "'");
  for (auto tok : io::split(d, ',')) cfg.deltas.push_back(static_cast<int>(io::parse_long(tok)));
  if (io::parse_long(l) != cfg.count()) throw FormatError("feature descriptor: L disagrees with deltas");
  if (f != "0" && f != "1") throw FormatError("feature descriptor: feedback must be 0 or 1");
  cfg.use_feedback = f == "1";
  cfg.validate();
  return cfg;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"baseline", "no-future", "future-no-feedback",
                                              "future-feedback"};
  return names;
}

std::optional<FeatureConfig> preset(const std::string& name) {
  if (name == "baseline") return std::nullopt;
  if (name == "no-future") return FeatureConfig{name, {0}, true};
  if (name == "future-no-feedback") return FeatureConfig{name, {4, 6}, false};
  if (name == "future-feedback") return FeatureConfig{name, {4, 6}, true};
  throw ConfigError("unknown generator configuration '" + name + "'");
}

namespace {

void put_block(const VehicleState& s, double* out) {
  out[0] = s.v.x();
  out[1] = s.v.y();
  out[2] = s.v.z();
  out[3] = s.euler.x();
  out[4] = s.euler.y();
  out[5] = s.euler.z();
  out[6] = s.omega.x();
  out[7] = s.omega.y();
  out[8] = s.omega.z();
  out[9] = s.zacc;
}

}  // namespace

Eigen::VectorXd build_features(const VehicleState& anchor,
                               const std::vector<VehicleState>& selected,
                               const FeatureConfig& cfg) {
  const int n = cfg.count();
  if (static_cast<int>(selected.size()) != n)
    throw ShapeError("expected " + std::to_string(n) + " selected states, got " +
                     std::to_string(selected.size()));
  Eigen::VectorXd x(cfg.feature_length());
  put_block(anchor, x.data());
  for (int i = 0; i < n; ++i) put_block(selected[i], x.data() + kStateBlock * (i + 1));
  double* rel = x.data() + kStateBlock * (n + 1);
  for (int i = 0; i < n; ++i) {
    const Vec3 d = selected[i].p - anchor.p;
    rel[3 * i + 0] = d.x();
    rel[3 * i + 1] = d.y();
    rel[3 * i + 2] = d.z();
  }
  return x;
}

Normalizer Normalizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.cols() == 0) throw InvalidInput("cannot fit normalization to zero samples");
  Normalizer n;
  const double count = static_cast<double>(samples.cols());
  n.mean = samples.rowwise().sum() / count;
  n.scale = Eigen::VectorXd::Ones(samples.rows());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double var = (samples.row(i).array() - n.mean(i)).square().sum() / count;
    if (var < 1e-8) {
      n.mean(i) = 0.0;
    } else {
      n.scale(i) = std::sqrt(var);
    }
  }
  return n;
}

Normalizer Normalizer::identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Eigen::VectorXd Normalizer::normalize(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw ShapeError("normalize: dimension mismatch");
  return ((x - mean).array() / scale.array()).matrix();
}

Eigen::VectorXd Normalizer::denormalize(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw ShapeError("denormalize: dimension mismatch");
  return (x.array() * scale.array()).matrix() + mean;
}

Eigen::MatrixXd Normalizer::normalize_columns(const Eigen::MatrixXd& samples) const {
  if (samples.rows() != mean.size()) throw ShapeError("normalize: dimension mismatch");
  return ((samples.colwise() - mean).array().colwise() / scale.array()).matrix();
}

ReferenceGenerator::ReferenceGenerator(FeatureConfig features, std::vector<Network> nets,
                                       Normalizer norm, Offsets target_scale, OffsetClip clip)
    : features_(std::move(features)), nets_(std::move(nets)), norm_(std::move(norm)),
      target_scale_(target_scale), clip_(clip) {
  features_.validate();
  const int dim = features_.feature_length();
  if (norm_.dim() == 0) throw ConfigError("generator has no feature normalization statistics");
  if (norm_.dim() != dim || norm_.scale.size() != dim)
    throw ConfigError("normalization has " + std::to_string(norm_.dim()) + " features, configuration needs " +
                      std::to_string(dim));
  if (nets_.size() != kOutputs) throw ConfigError("generator needs exactly six networks");
  for (const Network& n : nets_)
    if (n.input_dim() != dim) throw ConfigError("network input width does not match the feature length");
}

ReferenceGenerator ReferenceGenerator::zero(const FeatureConfig& features) {
  const int dim = features.feature_length();
  std::vector<Network> nets(kOutputs, Network::zeros(dim));
  Offsets scale;
  scale.fill(1.0);
  return ReferenceGenerator(features, std::move(nets), Normalizer::identity(dim), scale);
}

Offsets ReferenceGenerator::offsets(const Eigen::VectorXd& features) const {
  const Eigen::VectorXd x = norm_.normalize(features);
  Offsets out;
  for (int k = 0; k < kOutputs; ++k) {
    double v = forward(nets_[k], x) * target_scale_[k];
    if (clip_.enabled) {
      const double lim = k < 3 ? clip_.position : clip_.velocity;
      v = std::clamp(v, -lim, lim);
    }
    out[k] = v;
  }
  return out;
}

Eigen::VectorXd inference_features(const FeatureConfig& cfg, const DesiredTrajectory& traj,
                                   long t, const VehicleState& current) {
  if (t < 0 || t >= static_cast<long>(traj.size())) throw InvalidInput("tick index out of range");
  std::vector<VehicleState> selected;
  for (int d : cfg.deltas) selected.push_back(desired_state_at(traj, t + d));
  const VehicleState anchor = cfg.use_feedback ? current : traj[t > 0 ? t - 1 : 0];
  return build_features(anchor, selected, cfg);
}

VehicleState ReferenceGenerator::generate(const DesiredTrajectory& traj, long t,
                                          const VehicleState& current) const {
  const Offsets d = offsets(inference_features(features_, traj, t, current));
  VehicleState r = traj[t];
  r.p += Vec3(d[0], d[1], d[2]);
  r.v += Vec3(d[3], d[4], d[5]);
  return r;
}

std::string format_normalization(const Normalizer& norm, const Offsets& target_scale) {
  std::ostringstream out;
  out << "# flydraw-norm dim=" << norm.dim() << "\n";
  auto row = [&](const char* key, auto&& values, Eigen::Index n) {
    out << key;
    for (Eigen::Index i = 0; i < n; ++i) out << ' ' << io::format_double(values[i]);
    out << "\n";
  };
  row("mean", norm.mean, norm.dim());
  row("scale", norm.scale, norm.dim());
  row("target_scale", target_scale, kOutputs);
  return out.str();
}

void parse_normalization(const std::string& text, Normalizer& norm, Offsets& target_scale) {
  std::istringstream in(text);
  std::string header, line;
  if (!std::getline(in, header) || header.rfind("# flydraw-norm", 0) != 0)
    throw FormatError("not a normalization file");
  const long dim = io::parse_long(io::header_value(header, "dim"));
  auto row = [&](const char* key, long n) {
    if (!std::getline(in, line)) throw FormatError(std::string("normalization file truncated at ") + key);
    auto tok = io::split_ws(line);
    if (tok.empty() || tok[0] != key || static_cast<long>(tok.size()) != n + 1)
      throw FormatError(std::string("normalization file: malformed '") + key + "' row");
    std::vector<double> v;
    for (long i = 1; i <= n; ++i) v.push_back(io::parse_double(tok[i]));
    return v;
  };
  const auto m = row("mean", dim);
  const auto s = row("scale", dim);
  const auto t = row("target_scale", kOutputs);
  norm.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), dim);
  norm.scale = Eigen::Map<const Eigen::VectorXd>(s.data(), dim);
  std::copy(t.begin(), t.end(), target_scale.begin());
}

void save_bundle(const ReferenceGenerator& gen, const std::string& dir,
                 const std::string& extra_json) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = 1;
  const FeatureConfig& f = gen.features();
  manifest["features"] = {{"name", f.name}, {"deltas", f.deltas}, {"use_feedback", f.use_feedback},
                          {"feature_length", f.feature_length()}};
  manifest["outputs"] = json::array();
  manifest["models"] = json::array();
  for (int k = 0; k < kOutputs; ++k) {
    const std::string file = std::string(kOutputNames[k]) + ".model";
    manifest["outputs"].push_back(kOutputNames[k]);
    manifest["models"].push_back(file);
    save_model(gen.nets()[k], (fs::path(dir) / file).string(), "norm.txt");
  }
  manifest["normalization"] = "norm.txt";
  manifest["clip"] = {{"enabled", gen.clip().enabled},
                      {"position", gen.clip().position},
                      {"velocity", gen.clip().velocity}};
  manifest["info"] = json::parse(extra_json);
  io::write_file((fs::path(dir) / "norm.txt").string(),
                 format_normalization(gen.normalizer(), gen.target_scale()));
  io::write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

ReferenceGenerator load_bundle(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(io::read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw FormatError("bundle manifest in " + dir + ": " + e.what());
  }
  try {
    if (manifest.at("format").get<int>() != 1) throw FormatError("unsupported bundle format");
    const json& jf = manifest.at("features");
    FeatureConfig f{jf.at("name").get<std::string>(), jf.at("deltas").get<std::vector<int>>(),
                    jf.at("use_feedback").get<bool>()};
    const auto outputs = manifest.at("outputs").get<std::vector<std::string>>();
    const auto models = manifest.at("models").get<std::vector<std::string>>();
    if (outputs.size() != kOutputs || models.size() != kOutputs)
      throw FormatError("bundle must list six outputs");
    std::vector<Network> nets;
    for (int k = 0; k < kOutputs; ++k) {
      if (outputs[k] != kOutputNames[k]) throw FormatError("bundle output order mismatch at " + outputs[k]);
      nets.push_back(load_model((fs::path(dir) / models[k]).string()));
    }
    Normalizer norm;
    Offsets scale{};
    parse_normalization(
        io::read_file((fs::path(dir) / manifest.at("normalization").get<std::string>()).string()), norm,
        scale);
    OffsetClip clip;
    if (manifest.contains("clip")) {
      clip.enabled = manifest["clip"].at("enabled").get<bool>();
      clip.position = manifest["clip"].at("position").get<double>();
      clip.velocity = manifest["clip"].at("velocity").get<double>();
    }
    return ReferenceGenerator(std::move(f), std::move(nets), std::move(norm), scale, clip);
  } catch (const json::exception& e) {
    throw FormatError("bundle manifest in " + dir + ": " + e.what());
  }
}

}  // namespace flydraw
