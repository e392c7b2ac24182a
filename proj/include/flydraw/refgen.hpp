#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flydraw/mlp.hpp"
#include "flydraw/state.hpp"
#include "flydraw/trajectory.hpp"

namespace flydraw {

// Values per state block: {vx, vy, vz, phi, theta, psi, p, q, r, zacc}.
inline constexpr int kStateBlock = 10;
inline constexpr int kOutputs = 6;

// Output order of the six networks.
inline constexpr std::array<const char*, kOutputs> kOutputNames = {"dx", "dy", "dz",
                                                                   "dvx", "dvy", "dvz"};

struct FeatureConfig {
  std::string name = "future-feedback";
  std::vector<int> deltas{4, 6};  // 7 Hz steps ahead, strictly increasing
  bool use_feedback = true;

  int count() const { return static_cast<int>(deltas.size()); }
  int feature_length() const { return kStateBlock * (count() + 1) + 3 * count(); }
  int max_delta() const { return deltas.empty() ? 0 : deltas.back(); }
  void validate() const;

  bool operator==(const FeatureConfig&) const = default;
};

// "L=2 deltas=4,6 feedback=1"; the name is not part of the descriptor.
std::string describe(const FeatureConfig& cfg);
FeatureConfig parse_descriptor(const std::string& text, const std::string& name = "custom");

// Built-in generator configurations. "baseline" has no generator and yields
// nullopt; unknown names throw ConfigError.
std::optional<FeatureConfig> preset(const std::string& name);
const std::vector<std::string>& preset_names();

// Anchor block, then one block per selected state, then the selected
// positions relative to the anchor position.
Eigen::VectorXd build_features(const VehicleState& anchor,
                               const std::vector<VehicleState>& selected,
                               const FeatureConfig& cfg);

// Per-feature z-score. Columns with variance below 1e-8 pass through.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Normalizer fit(const Eigen::MatrixXd& samples);  // dim x n
  static Normalizer identity(int dim);

  int dim() const { return static_cast<int>(mean.size()); }
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& samples) const;

  bool operator==(const Normalizer& o) const { return mean == o.mean && scale == o.scale; }
};

struct OffsetClip {
  bool enabled = true;
  double position = 0.5;  // m, per component
  double velocity = 0.5;  // m/s, per component
};

using Offsets = std::array<double, kOutputs>;

class ReferenceGenerator {
public:
  // target_scale[k] converts network k's output to physical units.
  ReferenceGenerator(FeatureConfig features, std::vector<Network> nets,
                     Normalizer norm, Offsets target_scale, OffsetClip clip = {});

  // All-zero networks: every reference equals the desired state.
  static ReferenceGenerator zero(const FeatureConfig& features);

  const FeatureConfig& features() const { return features_; }
  const std::vector<Network>& nets() const { return nets_; }
  const Normalizer& normalizer() const { return norm_; }
  const Offsets& target_scale() const { return target_scale_; }
  const OffsetClip& clip() const { return clip_; }
  void set_clip(const OffsetClip& clip) { clip_ = clip; }

  // Physical offsets for a raw (unnormalized) feature vector, clipped.
  Offsets offsets(const Eigen::VectorXd& features) const;

  // Reference for 7 Hz tick t. With feedback the anchor is `current`,
  // otherwise the previous desired sample.
  VehicleState generate(const DesiredTrajectory& traj, long t,
                        const VehicleState& current) const;

private:
  FeatureConfig features_;
  std::vector<Network> nets_;
  Normalizer norm_;
  Offsets target_scale_;
  OffsetClip clip_;
};

inline VehicleState generate_reference(const ReferenceGenerator& gen,
                                       const DesiredTrajectory& traj, long t,
                                       const VehicleState& current) {
  return gen.generate(traj, t, current);
}

// Inputs the generator sees at tick t (anchor + selected desired states).
Eigen::VectorXd inference_features(const FeatureConfig& cfg, const DesiredTrajectory& traj,
                                   long t, const VehicleState& current);

// Directory holding manifest.json, one model file per output and norm.txt.
// `extra` is merged into the manifest under "info".
void save_bundle(const ReferenceGenerator& gen, const std::string& dir,
                 const std::string& extra_json = "{}");
ReferenceGenerator load_bundle(const std::string& dir);

std::string format_normalization(const Normalizer& norm, const Offsets& target_scale);
void parse_normalization(const std::string& text, Normalizer& norm, Offsets& target_scale);

}  // namespace flydraw
