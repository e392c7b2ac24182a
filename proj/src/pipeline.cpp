#include "flydraw/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include "flydraw/errors.hpp"

namespace flydraw {

ReferenceGenerator train_generator(const PairSet& train_set, const PairSet& validation,
                                   const TrainConfig& cfg, GeneratorTrainReport* report,
                                   const OffsetClip& clip) {
  cfg.validate();
  if (train_set.size() == 0) throw InvalidInput("no training pairs");
  if (validation.size() > 0 && !(validation.features == train_set.features))
    throw ConfigError("validation pairs were built for a different feature configuration");

  const Normalizer norm = Normalizer::fit(train_set.x);
  const Eigen::MatrixXd x_train = norm.normalize_columns(train_set.x);
  const Eigen::MatrixXd x_val =
      validation.size() > 0 ? norm.normalize_columns(validation.x) : Eigen::MatrixXd(x_train.rows(), 0);

  Offsets scale{};
  for (int k = 0; k < kOutputs; ++k) {
    const double rms = std::sqrt(train_set.y.row(k).squaredNorm() / static_cast<double>(train_set.size()));
    scale[k] = rms > 1e-12 ? rms : 1.0;
  }

  auto job = [&](int k) {
    RegressionData tr{x_train, train_set.y.row(k).transpose() / scale[k]};
    RegressionData va{x_val, validation.size() > 0 ? Eigen::VectorXd(validation.y.row(k).transpose() / scale[k])
                                                   : Eigen::VectorXd(0)};
    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(k);
    try {
      return train(tr, va, c);
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged(std::string("output ") + kOutputNames[k] + ": " + e.what(), e.iteration());
    }
  };

  std::vector<TrainResult> results(kOutputs);
  const unsigned workers = std::max(1u, std::min<unsigned>(kOutputs, std::thread::hardware_concurrency()));
  for (int first = 0; first < kOutputs; first += static_cast<int>(workers)) {
    std::vector<std::future<TrainResult>> running;
    const int last = std::min<int>(kOutputs, first + static_cast<int>(workers));
    for (int k = first; k < last; ++k) running.push_back(std::async(std::launch::async, job, k));
    for (int k = first; k < last; ++k) results[k] = running[k - first].get();
  }

  std::vector<Network> nets;
  for (int k = 0; k < kOutputs; ++k) nets.push_back(std::move(results[k].net));
  if (report) {
    for (int k = 0; k < kOutputs; ++k) {
      report->train_loss[k] = results[k].train_loss;
      report->validation_loss[k] = results[k].validation_loss;
    }
    report->train_pairs = train_set.size();
    report->validation_pairs = validation.size();
  }
  return ReferenceGenerator(train_set.features, std::move(nets), norm, scale, clip);
}

std::vector<RawLog> collect_training_logs(const PipelineConfig& cfg) {
  cfg.validate();
  const TrainingSweep sweep = gen_training_trajectory(cfg.sweep);
  return collect_log(sweep.trajectory, cfg.plant, cfg.gains, cfg.collect);
}

TrainedGenerator train_from_logs(const std::vector<RawLog>& logs, const PipelineConfig& cfg,
                                 const std::string& config_name) {
  const FeatureConfig& features = cfg.features(config_name);
  PairSet pairs;
  try {
    pairs = build_pairs(logs, features);
  } catch (const Error& e) {
    throw PipelineFailure("build-pairs", e.what());
  }
  if (pairs.size() == 0) throw PipelineFailure("build-pairs", "no training pairs");
  auto [tr, va] = split(pairs, cfg.split_ratio, cfg.split_seed);
  GeneratorTrainReport report;
  try {
    ReferenceGenerator gen = train_generator(tr, va, cfg.train, &report, cfg.clip);
    return {std::move(gen), report};
  } catch (const Error& e) {
    throw PipelineFailure("train", e.what());
  }
}

TrainedGenerator train_pipeline(const PipelineConfig& cfg, const std::string& config_name) {
  cfg.features(config_name);
  std::vector<RawLog> logs;
  try {
    logs = collect_training_logs(cfg);
  } catch (const SimulationDiverged& e) {
    throw PipelineFailure("collect", e.what());
  }
  return train_from_logs(logs, cfg, config_name);
}

NamedTrajectory holdout_segment(const PipelineConfig& cfg) {
  if (!cfg.collect.holdout) throw ConfigError("no holdout window configured");
  const TrainingSweep sweep = gen_training_trajectory(cfg.sweep);
  const long n = static_cast<long>(sweep.trajectory.size());
  const long first = static_cast<long>(std::ceil(cfg.collect.holdout->first * kTrajectoryRate));
  const long last = static_cast<long>(std::ceil(cfg.collect.holdout->second * kTrajectoryRate)) - 1;
  if (first < 0 || last >= n || last <= first) throw ConfigError("holdout window lies outside the sweep");
  return {"sweep-holdout", sweep.trajectory.segment(static_cast<std::size_t>(first), static_cast<std::size_t>(last))};
}

}  // namespace flydraw
