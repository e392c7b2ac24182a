#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "flydraw/config.hpp"
#include "flydraw/refgen.hpp"
#include "flydraw/trajectory.hpp"

namespace flydraw {

// Sessions and trained generators behind the HTTP endpoints and the CLI.
// Requests and responses are JSON text. Errors are thrown as the library's
// exception types (InvalidInput, NotFound, ConfigError, ...), which the HTTP
// layer maps to status codes.
//
// With a snapshot directory, sessions and model bundles are written there
// as they are created and loaded back on construction.
class Service {
public:
  explicit Service(PipelineConfig cfg, std::string snapshot_dir = "");
  ~Service();

  // {"points": [[x, z], ...], "speed_factor": 1.0, "config": "future-feedback"}
  std::string submit_path(const std::string& body);
  // {"configs": [...], "seed": 0, "pulse": false, "models": {config: id}}
  std::string simulate(const std::string& session_id, const std::string& body);
  // {"config": "future-feedback", "seed": ..., "iterations": ..., "flights": ...,
  //  "sweep_duration": ...}
  std::string train(const std::string& body);
  std::string list_models() const;
  std::string get_session(const std::string& id) const;

  // Registers an already trained generator; returns the new model id.
  std::string add_model(const ReferenceGenerator& gen, const std::string& info_json = "{}");

  const PipelineConfig& config() const { return cfg_; }

private:
  struct Session;
  struct Model;

  std::shared_ptr<const Model> find_model(const std::string& config, const std::string& id) const;
  std::string store_model(std::shared_ptr<Model> m);
  void persist_session(const Session& s) const;
  void load_snapshot();

  PipelineConfig cfg_;
  std::string snapshot_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::vector<std::shared_ptr<const Model>> models_;  // in creation order
  long next_session_ = 1;
  std::map<std::string, long> next_model_;
  std::mutex train_mutex_;
};

// 64-bit FNV-1a over the generator's serialized networks, statistics and
// feature configuration, hex encoded. Equal for equal bundles.
std::string generator_digest(const ReferenceGenerator& gen);

}  // namespace flydraw
