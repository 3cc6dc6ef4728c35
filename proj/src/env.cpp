#include "oacmab/env.hpp"

#include "oacmab/json_io.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

namespace oacmab {

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::no_human: return "no_human";
    case FusionMode::naive: return "naive";
    case FusionMode::psda: return "psda";
  }
  return "unknown";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "no_human") return FusionMode::no_human;
  if (name == "naive") return FusionMode::naive;
  if (name == "psda") return FusionMode::psda;
  throw std::invalid_argument("unknown fusion mode '" + std::string(name) +
                              "' (expected no_human, naive or psda)");
}

void CommSchedule::validate() const {
  if (downlink_interval < 1) throw std::invalid_argument("CommSchedule: downlink interval must be >= 1");
  if (uplink_delay < 0) throw std::invalid_argument("CommSchedule: uplink delay must be >= 0");
  if (uplink_delay >= downlink_interval) {
    throw std::invalid_argument("CommSchedule: uplink delay must be shorter than the downlink interval");
  }
}

void EpisodeConfig::validate() const {
  schedule.validate();
  if (!(fp_rate >= 0.0 && fp_rate <= 1.0)) throw std::invalid_argument("EpisodeConfig: fp_rate outside [0, 1]");
  if (assumed_fp > 1.0) throw std::invalid_argument("EpisodeConfig: assumed_fp above 1");
  if (reduction_threshold < 1) throw std::invalid_argument("EpisodeConfig: reduction_threshold must be >= 1");
  if (!(prior_var > 0.0)) throw std::invalid_argument("EpisodeConfig: prior_var must be > 0");
  if (horizon < 1) throw std::invalid_argument("EpisodeConfig: horizon must be >= 1");
  if (!(policy.epsilon >= 0.0 && policy.epsilon <= 1.0)) {
    throw std::invalid_argument("EpisodeConfig: epsilon outside [0, 1]");
  }
}

HumanReport human_observe(const EnvironmentTruth& env, int option, double fp_rate,
                          int emitted_step, const CommSchedule& schedule, Rng& rng) {
  if (!(fp_rate >= 0.0 && fp_rate <= 1.0)) throw std::invalid_argument("human_observe: fp_rate outside [0, 1]");
  const double fault_draw = uniform01(rng);
  const double label_draw = uniform01(rng);
  HumanReport report;
  report.correct = !(fault_draw < fp_rate);
  int label = 0;
  if (report.correct) {
    const auto& theta = env.theta_true.at(static_cast<std::size_t>(option));
    label = label_from_uniform(softmax_probabilities(theta, env.context.effective(option)), label_draw);
  } else {
    label = std::min(env.labels - 1, static_cast<int>(label_draw * env.labels));
  }
  report.observation = {option, label, ObservationSource::external, emitted_step,
                        emitted_step + schedule.uplink_delay};
  return report;
}

std::vector<FusionRecord> EpisodeTrajectory::external_fusions() const {
  std::vector<FusionRecord> out;
  for (const auto& s : steps) {
    for (const auto& f : s.fusions) {
      if (f.observation.source == ObservationSource::external) out.push_back(f);
    }
  }
  return out;
}

std::vector<Belief> init_belief(int options, int contexts, int labels, double prior_mean,
                                double prior_var) {
  if (!(prior_var > 0.0)) throw std::invalid_argument("init_belief: prior_var must be > 0");
  if (options < 1 || contexts < 1 || labels < 2) throw std::invalid_argument("init_belief: invalid dimensions");
  const Eigen::Index d = static_cast<Eigen::Index>(contexts) * labels;
  const Gaussian prior(Eigen::VectorXd::Constant(d, prior_mean),
                       prior_var * Eigen::MatrixXd::Identity(d, d));
  std::vector<Belief> beliefs;
  beliefs.reserve(static_cast<std::size_t>(options));
  for (int k = 0; k < options; ++k) beliefs.emplace_back(k, std::vector<Gaussian>{prior});
  return beliefs;
}

Rng derive_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

Episode::Episode(const EnvironmentTruth& env, EpisodeConfig cfg, std::uint64_t seed)
    : env_(&env),
      cfg_(std::move(cfg)),
      policy_rng_(derive_stream(seed, kPolicyStream)),
      state_(env.options) {
  for (int k = 0; k < env.options; ++k) {
    internal_rngs_.push_back(derive_stream(seed, kInternalStreamBase + static_cast<std::uint32_t>(k)));
  }
  cfg_.validate();
  if (cfg_.policy.kind == PolicyKind::active_inference && cfg_.policy.preference.labels() != env.labels) {
    throw std::invalid_argument("Episode: preference size does not match label count");
  }
  beliefs_ = init_belief(env.options, env.contexts, env.labels, cfg_.prior_mean, cfg_.prior_var);
}

void Episode::reset_beliefs(std::vector<Belief> beliefs) {
  if (t_ != 0 || !staged_.empty()) throw std::logic_error("reset_beliefs: episode already started");
  if (beliefs.size() != beliefs_.size()) throw std::invalid_argument("reset_beliefs: wrong number of beliefs");
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    if (beliefs[k].dim() != beliefs_[k].dim()) throw std::invalid_argument("reset_beliefs: dimension mismatch");
  }
  beliefs_ = std::move(beliefs);
}

FusionRecord Episode::fuse_external(const SemanticObservation& obs) {
  return fuse_external(obs, cfg_.fusion);
}

FusionRecord Episode::fuse_external(const SemanticObservation& obs, FusionMode mode) {
  if (obs.source != ObservationSource::external) {
    throw std::invalid_argument("fuse_external: observation is not external");
  }
  if (obs.option < 0 || obs.option >= env_->options) throw std::out_of_range("fuse_external: option out of range");
  if (obs.label < 0 || obs.label >= env_->labels) throw std::out_of_range("fuse_external: label out of range");
  auto& belief = beliefs_[static_cast<std::size_t>(obs.option)];
  const Eigen::VectorXd x = env_->context.effective(obs.option);
  FusionRecord rec;
  rec.step = t_ + 1;
  rec.observation = obs;
  rec.components_before = belief.size();
  switch (mode) {
    case FusionMode::naive: {
      auto upd = naive_update(belief, obs.label, x);
      rec.lambda = upd.lambda;
      belief = std::move(upd.posterior);
      break;
    }
    case FusionMode::psda: {
      const FusionConfig fc{cfg_.fusion_fp(), env_->labels, cfg_.reduction_threshold};
      auto upd = psda_update(belief, obs.label, x, fc);
      rec.lambda = upd.lambda;
      rec.association = upd.association;
      belief = std::move(upd.belief);
      break;
    }
    case FusionMode::no_human:
      throw std::logic_error("fuse_external: external observations are disabled (no_human)");
  }
  rec.components_after = belief.size();
  staged_.push_back(rec);
  return rec;
}

double belief_error(std::span<const Belief> beliefs, const EnvironmentTruth& env) {
  double total = 0.0;
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    total += (mixture_mean(beliefs[k]) - flatten(env.theta_true[k])).norm();
  }
  return total / static_cast<double>(beliefs.size());
}

double Episode::belief_error() const { return oacmab::belief_error(beliefs_, *env_); }

const StepRecord& Episode::step() {
  StepRecord rec;
  rec.step = t_ + 1;
  try {
    Selection sel = select_option(cfg_.policy, {beliefs_, env_, &state_, &policy_rng_});
    rec.option = sel.option;
    if (!sel.efe.empty()) last_efe_ = std::move(sel.efe);

    const Eigen::VectorXd x = env_->context.effective(rec.option);
    rec.internal_label =
        sample_outcome(env_->theta_true[static_cast<std::size_t>(rec.option)], x, internal_rngs_[static_cast<std::size_t>(rec.option)]);
    auto& belief = beliefs_[static_cast<std::size_t>(rec.option)];
    FusionRecord internal;
    internal.step = rec.step;
    internal.observation = {rec.option, rec.internal_label, ObservationSource::internal, rec.step,
                            rec.step};
    internal.components_before = belief.size();
    auto upd = naive_update(belief, rec.internal_label, x);
    internal.lambda = upd.lambda;
    belief = std::move(upd.posterior);
    internal.components_after = belief.size();

    rec.reward = rec.internal_label == env_->preferred_label ? 1 : 0;
    state_.record(rec.option, rec.reward);
    rec.instant_regret = env_->psi_star() - env_->psi(rec.option);
    regret_ += rec.instant_regret;
    rec.cumulative_regret = regret_;
    rec.fusions = std::move(staged_);
    staged_.clear();
    rec.fusions.push_back(internal);
    rec.belief_error = belief_error();
  } catch (const std::exception& e) {
    throw std::runtime_error("step " + std::to_string(rec.step) + ": " + e.what());
  }
  ++t_;
  records_.push_back(std::move(rec));
  return records_.back();
}

EpisodeTrajectory run_episode(const EnvironmentTruth& env, const EpisodeConfig& cfg,
                              std::uint64_t seed) {
  Episode episode(env, cfg, seed);
  std::vector<Rng> human_rngs;
  for (int k = 0; k < env.options; ++k) {
    human_rngs.push_back(derive_stream(seed, kHumanStreamBase + static_cast<std::uint32_t>(k)));
  }
  std::deque<SemanticObservation> in_flight;
  for (int t = 1; t <= cfg.horizon; ++t) {
    while (!in_flight.empty() && in_flight.front().arrival_step == t) {
      episode.fuse_external(in_flight.front());
      in_flight.pop_front();
    }
    const StepRecord& rec = episode.step();
    if (cfg.fusion != FusionMode::no_human && t % cfg.schedule.downlink_interval == 0) {
      // Simulator-side only: the validity flag stays here.
      const HumanReport report =
          human_observe(env, rec.option, cfg.fp_rate, t, cfg.schedule,
                        human_rngs[static_cast<std::size_t>(rec.option)]);
      if (report.observation.arrival_step <= cfg.horizon) in_flight.push_back(report.observation);
    }
  }
  return {episode.records(), episode.beliefs()};
}

std::vector<double> cumulative_regret(const EpisodeTrajectory& trajectory,
                                      const EnvironmentTruth& env) {
  std::vector<int> counts(static_cast<std::size_t>(env.options), 0);
  std::vector<double> out;
  out.reserve(trajectory.steps.size());
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
    ++counts.at(static_cast<std::size_t>(trajectory.steps[t].option));
    double pulled = 0.0;
    for (int k = 0; k < env.options; ++k) pulled += counts[static_cast<std::size_t>(k)] * env.psi(k);
    out.push_back(static_cast<double>(t + 1) * env.psi_star() - pulled);
  }
  return out;
}

void write_trajectory_jsonl(std::ostream& out, const EpisodeTrajectory& trajectory) {
  for (const auto& s : trajectory.steps) out << step_to_json(s).dump() << '\n';
}

}  // namespace oacmab
