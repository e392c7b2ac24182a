#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flydraw/controller.hpp"
#include "flydraw/dataset.hpp"
#include "flydraw/mlp.hpp"
#include "flydraw/refgen.hpp"
#include "flydraw/sim.hpp"
#include "flydraw/trajectory.hpp"

namespace flydraw {

struct EvalSettings {
  std::uint64_t seed = 0;
  // Pulse seeds averaged by the disturbance ablation.
  std::vector<std::uint64_t> pulse_seeds{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<double> speed_factors{0.67, 0.83, 1.0, 1.17, 1.33, 1.67};
  std::string speed_sweep_path = "circle";
  std::string disturbance_path = "circle";
};

struct PipelineConfig {
  PlantConfig plant;
  ControllerGains gains;
  TrainConfig train = [] {
    TrainConfig t;
    t.seed = 100;
    return t;
  }();
  SweepOptions sweep;
  CollectOptions collect = [] {
    CollectOptions c;
    c.holdout = std::make_pair(250.0, 300.0);
    return c;
  }();
  double split_ratio = 0.9;
  std::uint64_t split_seed = 7;
  OffsetClip clip;
  MotionBounds bounds;
  EvalSettings eval;
  // Named generator configurations; "baseline" maps to no generator.
  std::map<std::string, std::optional<FeatureConfig>> presets = [] {
    std::map<std::string, std::optional<FeatureConfig>> m;
    for (const std::string& n : preset_names()) m[n] = preset(n);
    return m;
  }();

  // Throws ConfigError for "baseline" and unknown names.
  const FeatureConfig& features(const std::string& name) const;
  void validate() const;
};

// JSON document; every section and field is optional and overrides the
// defaults. Unknown keys are rejected with ConfigError.
PipelineConfig parse_config(const std::string& json_text);
std::string format_config(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path);

}  // namespace flydraw
