#include "oacmab/service.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <string>

namespace oacmab {

namespace {

constexpr int kMaxAdvance = 100000;

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ServiceError::bad_request(std::string("field '") + key + "' has the wrong type");
  }
}

int required_int(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    throw ServiceError::bad_request(std::string("missing field '") + key + "'");
  }
  const json& v = body.at(key);
  if (!v.is_number_integer()) throw ServiceError::bad_request(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

// Runs fn, turning argument errors from the core into 400 responses.
template <typename Fn>
auto as_bad_request(Fn&& fn) {
  try {
    return fn();
  } catch (const ServiceError&) {
    throw;
  } catch (const json::exception& e) {
    throw ServiceError::bad_request(e.what());
  } catch (const std::invalid_argument& e) {
    throw ServiceError::bad_request(e.what());
  } catch (const std::out_of_range& e) {
    throw ServiceError::bad_request(e.what());
  }
}

}  // namespace

SessionConfig SessionConfig::from_json(const json& j) {
  if (!j.is_object()) throw ServiceError::bad_request("session config must be a JSON object");
  static const std::set<std::string> known{
      "k", "c", "f", "f_p", "seed", "policy", "fusion", "fp_rate", "assumed_fp", "downlink_interval",
      "uplink_delay", "epsilon", "p_ev_preferred", "p_ev_other", "reduction_threshold", "prior_mean",
      "prior_var", "environment"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ServiceError::bad_request("unknown config field '" + item.key() + "'");
  }

  SessionConfig cfg;
  if (j.contains("environment")) {
    for (const char* key : {"k", "c", "f", "f_p"}) {
      if (j.contains(key)) {
        throw ServiceError::bad_request(std::string("'") + key + "' conflicts with an explicit environment");
      }
    }
    cfg.environment = j.at("environment");
    const EnvironmentTruth env = as_bad_request([&] { return environment_from_json(*cfg.environment); });
    cfg.options = env.options;
    cfg.contexts = env.contexts;
    cfg.labels = env.labels;
    cfg.preferred_label = env.preferred_label;
  } else {
    cfg.options = field(j, "k", cfg.options);
    cfg.contexts = field(j, "c", cfg.contexts);
    cfg.labels = field(j, "f", cfg.labels);
    cfg.preferred_label = field(j, "f_p", cfg.preferred_label + 1) - 1;
  }
  cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);

  EpisodeConfig& ep = cfg.episode;
  as_bad_request([&] {
    ep.policy.kind = parse_policy(field<std::string>(j, "policy", "aif"));
    ep.fusion = parse_fusion_mode(field<std::string>(j, "fusion", "psda"));
    return 0;
  });
  ep.fp_rate = field(j, "fp_rate", ep.fp_rate);
  ep.assumed_fp = field(j, "assumed_fp", ep.assumed_fp);
  ep.schedule.downlink_interval = field(j, "downlink_interval", ep.schedule.downlink_interval);
  ep.schedule.uplink_delay = field(j, "uplink_delay", ep.schedule.uplink_delay);
  ep.policy.epsilon = field(j, "epsilon", ep.policy.epsilon);
  cfg.p_ev_preferred = field(j, "p_ev_preferred", cfg.p_ev_preferred);
  cfg.p_ev_other = field(j, "p_ev_other", cfg.p_ev_other);
  const int threshold = field(j, "reduction_threshold", static_cast<int>(ep.reduction_threshold));
  if (threshold < 1) throw ServiceError::bad_request("reduction_threshold must be >= 1");
  ep.reduction_threshold = static_cast<std::size_t>(threshold);
  ep.prior_mean = field(j, "prior_mean", ep.prior_mean);
  ep.prior_var = field(j, "prior_var", ep.prior_var);

  as_bad_request([&] {
    if (cfg.options < 2 || cfg.contexts < 1 || cfg.labels < 2) {
      throw std::invalid_argument("need k >= 2, c >= 1, f >= 2");
    }
    if (cfg.preferred_label < 0 || cfg.preferred_label >= cfg.labels) throw std::invalid_argument("f_p outside 1..f");
    ep.policy.preference = EvolutionaryPrior::preferring(cfg.labels, cfg.preferred_label, cfg.p_ev_preferred, cfg.p_ev_other);
    ep.validate();
    return 0;
  });
  return cfg;
}

json SessionConfig::to_json() const {
  json j = {{"seed", seed},
            {"policy", to_string(episode.policy.kind)},
            {"fusion", to_string(episode.fusion)},
            {"fp_rate", episode.fp_rate},
            {"assumed_fp", episode.assumed_fp},
            {"downlink_interval", episode.schedule.downlink_interval},
            {"uplink_delay", episode.schedule.uplink_delay},
            {"epsilon", episode.policy.epsilon},
            {"p_ev_preferred", p_ev_preferred},
            {"p_ev_other", p_ev_other},
            {"reduction_threshold", episode.reduction_threshold},
            {"prior_mean", episode.prior_mean},
            {"prior_var", episode.prior_var}};
  if (environment) {
    j["environment"] = *environment;
  } else {
    j["k"] = options;
    j["c"] = contexts;
    j["f"] = labels;
    j["f_p"] = preferred_label + 1;
  }
  return j;
}

Session::Session(std::string id, SessionConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {
  env_ = std::make_unique<EnvironmentTruth>(
      cfg_.environment ? environment_from_json(*cfg_.environment)
                       : generate_environment(cfg_.options, cfg_.contexts, cfg_.labels, cfg_.preferred_label,
                                              cfg_.seed));
  episode_ = std::make_unique<Episode>(*env_, cfg_.episode, cfg_.seed);
}

void Session::advance(int steps) {
  if (steps < 1 || steps > kMaxAdvance) {
    throw ServiceError::bad_request("steps must be in 1.." + std::to_string(kMaxAdvance));
  }
  const int interval = cfg_.episode.schedule.downlink_interval;
  int done = 0;
  try {
    for (; done < steps; ++done) {
      const StepRecord& rec = episode_->step();
      if (cfg_.episode.fusion != FusionMode::no_human && rec.step % interval == 0) {
        pending_.push_back({rec.option, rec.step});
      }
    }
  } catch (...) {
    if (done > 0) ops_.push_back({{"op", "advance"}, {"steps", done}});
    throw;
  }
  ops_.push_back({{"op", "advance"}, {"steps", steps}});
}

FusionRecord Session::submit(int option, int label) {
  const EnvironmentTruth& env = episode_->env();
  if (option < 0 || option >= env.options) {
    throw ServiceError::bad_request("option must be in 1.." + std::to_string(env.options));
  }
  if (label < 0 || label >= env.labels) {
    throw ServiceError::bad_request("label must be in 1.." + std::to_string(env.labels));
  }
  const auto it = std::find_if(pending_.begin(), pending_.end(),
                               [&](const PendingDownlink& p) { return p.option == option; });
  if (it == pending_.end()) {
    throw ServiceError::not_pending("option " + std::to_string(option + 1) + " has no pending downlink");
  }
  const SemanticObservation obs{option, label, ObservationSource::external, it->emitted_step,
                                std::max(it->emitted_step, episode_->current_step())};
  FusionRecord rec = episode_->fuse_external(obs);
  pending_.erase(it);
  observations_.push_back(rec);
  ops_.push_back({{"op", "observe"}, {"option", option + 1}, {"label", label + 1}});
  return rec;
}

std::vector<EfeScore> Session::efe_scores() const {
  const EnvironmentTruth& env = episode_->env();
  std::vector<EfeScore> scores;
  for (int k = 0; k < env.options; ++k) {
    EfeScore s = efe(episode_->beliefs()[static_cast<std::size_t>(k)], env.context.effective(k),
                     cfg_.episode.policy.preference);
    s.option = k;
    scores.push_back(std::move(s));
  }
  return scores;
}

json Session::pending_json() const {
  json items = json::array();
  for (const auto& p : pending_) items.push_back({{"option", p.option + 1}, {"emitted_step", p.emitted_step}});
  return {{"step", episode_->current_step()}, {"pending", items}};
}

json Session::efe_json() const {
  json scores = json::array();
  int best = -1;
  double best_total = 0.0;
  for (const auto& s : efe_scores()) {
    json j = efe_to_json(s);
    double risk = 0.0;
    double ambiguity = 0.0;
    for (const auto& o : s.per_outcome) {
      risk += o.term1;
      ambiguity += o.term2;
    }
    j["risk"] = risk;
    j["ambiguity"] = ambiguity;
    scores.push_back(std::move(j));
    if (best < 0 || s.total < best_total) {
      best = s.option;
      best_total = s.total;
    }
  }
  return {{"step", episode_->current_step()}, {"scores", scores}, {"argmin", best + 1}};
}

json Session::state() const {
  const EnvironmentTruth& env = episode_->env();
  const PolicyState& ps = episode_->policy_state();
  json options = json::array();
  for (int k = 0; k < env.options; ++k) {
    const Belief& b = episode_->beliefs()[static_cast<std::size_t>(k)];
    options.push_back({{"option", k + 1},
                       {"success_probability", plug_in_success(b, env.context.effective(k), env.preferred_label)},
                       {"components", b.size()},
                       {"pulls", ps.count(k)},
                       {"mean_reward", ps.mean_reward(k)}});
  }
  json regret = json::array();
  json selections = json::array();
  for (const auto& r : episode_->records()) {
    regret.push_back(r.cumulative_regret);
    selections.push_back(r.option + 1);
  }
  json log = json::array();
  for (const auto& f : observations_) log.push_back(fusion_to_json(f));
  return {{"id", id_},
          {"step", episode_->current_step()},
          {"config", cfg_.to_json()},
          {"options", options},
          {"efe", efe_json().at("scores")},
          {"regret", regret},
          {"selections", selections},
          {"pending", pending_json().at("pending")},
          {"observations", log}};
}

json Session::snapshot() const {
  return {{"id", id_}, {"config", cfg_.to_json()}, {"operations", ops_}};
}

Session Session::replay(const json& snapshot) {
  Session s(snapshot.at("id").get<std::string>(), SessionConfig::from_json(snapshot.at("config")));
  for (const auto& op : snapshot.at("operations")) {
    const std::string kind = op.at("op").get<std::string>();
    if (kind == "advance") {
      s.advance(op.at("steps").get<int>());
    } else if (kind == "observe") {
      s.submit(op.at("option").get<int>() - 1, op.at("label").get<int>() - 1);
    } else {
      throw std::invalid_argument("unknown operation '" + kind + "'");
    }
  }
  return s;
}

SessionStore::SessionStore(std::filesystem::path snapshot_dir) : snapshot_dir_(std::move(snapshot_dir)) {}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError::not_found("no session '" + id + "'");
  return it->second;
}

json SessionStore::create(const json& config) {
  SessionConfig cfg = SessionConfig::from_json(config);
  std::string id;
  {
    std::unique_lock lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  auto entry = std::make_shared<Entry>(as_bad_request([&] { return Session(id, std::move(cfg)); }));
  json state = entry->session.state();
  std::unique_lock lock(mutex_);
  sessions_.emplace(id, std::move(entry));
  return state;
}

json SessionStore::state(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session.state();
}

json SessionStore::advance(const std::string& id, const json& body) {
  auto entry = find(id);
  const int steps = required_int(body, "steps");
  std::lock_guard lock(entry->mutex);
  entry->session.advance(steps);
  return entry->session.state();
}

json SessionStore::pending(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session.pending_json();
}

json SessionStore::submit(const std::string& id, const json& body) {
  auto entry = find(id);
  const int option = required_int(body, "option");
  const int label = required_int(body, "label");
  std::lock_guard lock(entry->mutex);
  return fusion_to_json(entry->session.submit(option - 1, label - 1));
}

json SessionStore::efe(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session.efe_json();
}

std::filesystem::path SessionStore::save_snapshot(const std::string& id) const {
  if (snapshot_dir_.empty()) throw ServiceError::bad_request("snapshots are disabled (no snapshot directory)");
  auto entry = find(id);
  json doc;
  {
    std::lock_guard lock(entry->mutex);
    doc = entry->session.snapshot();
  }
  std::filesystem::create_directories(snapshot_dir_);
  const auto path = snapshot_dir_ / (id + ".json");
  const auto tmp = snapshot_dir_ / (id + ".json.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
  return path;
}

int SessionStore::load_snapshots() {
  if (snapshot_dir_.empty() || !std::filesystem::exists(snapshot_dir_)) return 0;
  int loaded = 0;
  for (const auto& file : std::filesystem::directory_iterator(snapshot_dir_)) {
    if (file.path().extension() != ".json") continue;
    std::ifstream in(file.path());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw std::runtime_error(file.path().string() + ": " + e.what());
    }
    Session s = Session::replay(doc);
    const std::string id = s.id();
    std::unique_lock lock(mutex_);
    if (id.size() > 1 && id.front() == 's') {
      try {
        next_id_ = std::max(next_id_, std::stol(id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
    sessions_.insert_or_assign(id, std::make_shared<Entry>(std::move(s)));
    ++loaded;
  }
  return loaded;
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

}  // namespace oacmab
