#pragma once

#include "oacmab/inference.hpp"
#include "oacmab/policies.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace oacmab {

enum class FusionMode { no_human, naive, psda };

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);

/// Downlink every `downlink_interval` steps; the human's label arrives
/// `uplink_delay` steps later.
struct CommSchedule {
  int downlink_interval = 4;
  int uplink_delay = 2;

  void validate() const;
};

enum class ObservationSource { internal, external };

/// Agent-facing observation record. It carries no validity flag.
struct SemanticObservation {
  int option = 0;
  int label = 0;
  ObservationSource source = ObservationSource::internal;
  int emitted_step = 0;
  int arrival_step = 0;
};

/// Simulator-side human report: the observation plus the hidden validity
/// flag zeta (true = correct). Only the simulator reads `correct`.
struct HumanReport {
  SemanticObservation observation;
  bool correct = true;
};

/// One simulated scientist label about option k. Consumes exactly two uniform
/// variates: one for the fault draw, one for the label.
HumanReport human_observe(const EnvironmentTruth& env, int option, double fp_rate,
                          int emitted_step, const CommSchedule& schedule, Rng& rng);

/// Audit record of one belief update.
struct FusionRecord {
  int step = 0;
  SemanticObservation observation;
  std::optional<AssociationPosterior> association;  // set for PSDA updates only
  double lambda = 0.0;
  std::size_t components_before = 0;
  std::size_t components_after = 0;
};

struct StepRecord {
  int step = 0;
  int option = 0;
  int internal_label = 0;
  int reward = 0;
  double instant_regret = 0.0;
  double cumulative_regret = 0.0;
  double belief_error = 0.0;  // mean over options of ||mixture mean - flattened truth||
  std::vector<FusionRecord> fusions;  // external fusions first, then the internal one
};

struct EpisodeTrajectory {
  std::vector<StepRecord> steps;
  std::vector<Belief> final_beliefs;

  std::vector<FusionRecord> external_fusions() const;
};

struct EpisodeConfig {
  PolicyConfig policy;
  FusionMode fusion = FusionMode::psda;
  CommSchedule schedule;
  double fp_rate = 0.0;       // true fault rate of the simulated human
  double assumed_fp = -1.0;   // FP used by PSDA; negative means fp_rate
  std::size_t reduction_threshold = 10;
  double prior_mean = 0.5;
  double prior_var = 1.0;
  int horizon = 100;

  double fusion_fp() const { return assumed_fp < 0.0 ? fp_rate : assumed_fp; }
  void validate() const;
};

/// One Gaussian mixand per option: mean prior_mean * 1, covariance prior_var * I.
std::vector<Belief> init_belief(int options, int contexts, int labels, double prior_mean = 0.5,
                                double prior_var = 1.0);

/// Independent random stream `stream` of the episode seeded with `seed`.
Rng derive_stream(std::uint64_t seed, std::uint32_t stream);

// Internal observations of option k use stream kInternalStreamBase + k and
// human reports about option k use kHumanStreamBase + k, so the n-th draw about
// an option sees the same variates in every paired cell.
enum StreamId : std::uint32_t {
  kPolicyStream = 1,
  kInternalStreamBase = 1000,
  kHumanStreamBase = 2000,
};

/// Step-by-step OA-CMAB state machine shared by the batch simulator and the
/// interactive service. Internal observations always use naive fusion.
class Episode {
 public:
  Episode(const EnvironmentTruth& env, EpisodeConfig cfg, std::uint64_t seed);

  /// Fuses an external observation with the configured mode (naive or psda)
  /// and appends the record to the current step's pending fusion list.
  FusionRecord fuse_external(const SemanticObservation& obs);
  FusionRecord fuse_external(const SemanticObservation& obs, FusionMode mode);

  /// Advances one step: select, observe internally, fuse, account regret.
  const StepRecord& step();

  /// Replaces the prior beliefs; only before the first step.
  void reset_beliefs(std::vector<Belief> beliefs);

  int current_step() const { return t_; }
  const EnvironmentTruth& env() const { return *env_; }
  const EpisodeConfig& config() const { return cfg_; }
  const std::vector<Belief>& beliefs() const { return beliefs_; }
  const PolicyState& policy_state() const { return state_; }
  const std::vector<StepRecord>& records() const { return records_; }
  const std::vector<EfeScore>& last_efe() const { return last_efe_; }

 private:
  double belief_error() const;

  const EnvironmentTruth* env_;
  EpisodeConfig cfg_;
  Rng policy_rng_;
  std::vector<Rng> internal_rngs_;
  std::vector<Belief> beliefs_;
  PolicyState state_;
  int t_ = 0;
  double regret_ = 0.0;
  std::vector<FusionRecord> staged_;
  std::vector<StepRecord> records_;
  std::vector<EfeScore> last_efe_;
};

/// Full simulated episode with the asynchronous human channel.
EpisodeTrajectory run_episode(const EnvironmentTruth& env, const EpisodeConfig& cfg,
                              std::uint64_t seed);

/// Regret(t) = t psi* - sum_{s <= t} psi_{k_s}, from the pulled options only.
std::vector<double> cumulative_regret(const EpisodeTrajectory& trajectory,
                                      const EnvironmentTruth& env);

double belief_error(std::span<const Belief> beliefs, const EnvironmentTruth& env);

inline constexpr int kTrajectorySchemaVersion = 1;

/// One JSON object per line, one line per step.
void write_trajectory_jsonl(std::ostream& out, const EpisodeTrajectory& trajectory);

}  // namespace oacmab
