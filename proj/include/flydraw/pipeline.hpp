#pragma once

#include <array>

#include "flydraw/config.hpp"
#include "flydraw/dataset.hpp"
#include "flydraw/eval.hpp"
#include "flydraw/mlp.hpp"
#include "flydraw/refgen.hpp"

namespace flydraw {

struct GeneratorTrainReport {
  Offsets train_loss{};       // standardized units, per output
  Offsets validation_loss{};  // NaN when there is no validation set
  Eigen::Index train_pairs = 0;
  Eigen::Index validation_pairs = 0;
};

// Fits feature statistics and per-output target scales (RMS) on `train`,
// then trains the six networks, network k seeded with cfg.seed + k. The
// networks are trained concurrently; the result does not depend on
// scheduling.
ReferenceGenerator train_generator(const PairSet& train, const PairSet& validation,
                                   const TrainConfig& cfg, GeneratorTrainReport* report = nullptr,
                                   const OffsetClip& clip = {});

struct TrainedGenerator {
  ReferenceGenerator generator;
  GeneratorTrainReport report;
};

// Baseline flights on the training sweep described by cfg.
std::vector<RawLog> collect_training_logs(const PipelineConfig& cfg);

// build-pairs -> split -> train for the named configuration.
TrainedGenerator train_from_logs(const std::vector<RawLog>& logs, const PipelineConfig& cfg,
                                 const std::string& config_name);

// collect -> build-pairs -> split -> train.
TrainedGenerator train_pipeline(const PipelineConfig& cfg, const std::string& config_name);

// The part of the training sweep excluded from collection. Throws
// ConfigError when cfg has no holdout window.
NamedTrajectory holdout_segment(const PipelineConfig& cfg);

}  // namespace flydraw
