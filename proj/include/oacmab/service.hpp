#pragma once

// Interactive sessions: a live episode whose external observations come from
// a person answering downlinks instead of the simulated human.

#include "oacmab/env.hpp"
#include "oacmab/json_io.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace oacmab {

class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  json body() const { return {{"error", what()}, {"code", code_}}; }

  static ServiceError not_found(const std::string& msg) { return {404, "not_found", msg}; }
  static ServiceError bad_request(const std::string& msg) { return {400, "bad_request", msg}; }
  static ServiceError not_pending(const std::string& msg) { return {409, "not_pending", msg}; }

 private:
  int status_;
  std::string code_;
};

/// Creation document. Every key is optional:
///   k, c, f, f_p (1-based), seed, policy ("aif"), fusion ("psda"), fp_rate,
///   assumed_fp, downlink_interval, uplink_delay, epsilon, p_ev_preferred,
///   p_ev_other, reduction_threshold, prior_mean, prior_var,
///   environment (an environment document replacing k/c/f/f_p; seed still
///   drives the episode streams).
struct SessionConfig {
  int options = 5;
  int contexts = 3;
  int labels = 4;
  int preferred_label = 0;
  std::uint64_t seed = 1;
  double p_ev_preferred = 1.0;
  double p_ev_other = 0.01;
  EpisodeConfig episode;
  std::optional<json> environment;

  static SessionConfig from_json(const json& j);
  json to_json() const;
};

struct PendingDownlink {
  int option = 0;
  int emitted_step = 0;
};

/// Replayable mutation: {"op":"advance","steps":n} or
/// {"op":"observe","option":k,"label":f} (1-based).
using OperationLog = std::vector<json>;

class Session {
 public:
  Session(std::string id, SessionConfig cfg);

  void advance(int steps);
  FusionRecord submit(int option, int label);  // 0-based

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  const Episode& episode() const { return *episode_; }
  const std::vector<PendingDownlink>& pending() const { return pending_; }
  const std::vector<FusionRecord>& observations() const { return observations_; }
  const OperationLog& operations() const { return ops_; }

  /// EFE of every option under the current beliefs.
  std::vector<EfeScore> efe_scores() const;

  json state() const;
  json pending_json() const;
  json efe_json() const;
  json snapshot() const;  // {id, config, operations}

  /// Rebuilds a session by replaying a snapshot's operation log.
  static Session replay(const json& snapshot);

 private:
  std::string id_;
  SessionConfig cfg_;
  std::unique_ptr<EnvironmentTruth> env_;  // heap-held so episode_'s pointer survives moves
  std::unique_ptr<Episode> episode_;
  std::vector<PendingDownlink> pending_;
  std::vector<FusionRecord> observations_;
  OperationLog ops_;
};

/// Thread-safe registry. Mutations of one session are serialized; reads take
/// the same lock so they see a consistent state.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path snapshot_dir = {});

  json create(const json& config);  // returns the initial state
  json state(const std::string& id) const;
  json advance(const std::string& id, const json& body);
  json pending(const std::string& id) const;
  json submit(const std::string& id, const json& body);
  json efe(const std::string& id) const;

  /// Writes <snapshot_dir>/<id>.json and returns its path.
  std::filesystem::path save_snapshot(const std::string& id) const;
  /// Replays every *.json in the snapshot directory; returns how many loaded.
  int load_snapshots();

  std::size_t size() const;

 private:
  struct Entry {
    mutable std::mutex mutex;
    Session session;
    explicit Entry(Session s) : session(std::move(s)) {}
  };
  std::shared_ptr<Entry> find(const std::string& id) const;

  std::filesystem::path snapshot_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  long next_id_ = 1;
};

}  // namespace oacmab
