#pragma once

#include "oacmab/efe.hpp"
#include "oacmab/gaussmix.hpp"
#include "oacmab/model.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oacmab {

enum class PolicyKind { oracle, epsilon_greedy, ucb, thompson, active_inference };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy(std::string_view name);

/// Pull counts and reward sums; sum of counts equals the step counter.
class PolicyState {
 public:
  explicit PolicyState(int options = 0)
      : counts_(static_cast<std::size_t>(options), 0), rewards_(static_cast<std::size_t>(options), 0.0) {}

  void record(int option, double reward) {
    ++counts_.at(static_cast<std::size_t>(option));
    rewards_.at(static_cast<std::size_t>(option)) += reward;
    ++t_;
  }

  int step() const { return t_; }
  int options() const { return static_cast<int>(counts_.size()); }
  int count(int option) const { return counts_.at(static_cast<std::size_t>(option)); }
  double reward_sum(int option) const { return rewards_.at(static_cast<std::size_t>(option)); }
  double mean_reward(int option) const {
    const int n = count(option);
    return n == 0 ? 0.0 : reward_sum(option) / n;
  }

 private:
  int t_ = 0;
  std::vector<int> counts_;
  std::vector<double> rewards_;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::active_inference;
  double epsilon = 0.25;
  EvolutionaryPrior preference;
};

struct Selection {
  int option = 0;
  std::vector<EfeScore> efe;  // filled by active inference only
};

/// argmax_k psi_k, lowest index on ties.
int oracle_select(const EnvironmentTruth& env);

/// Plug-in success probability softmax(mixture mean, f_p, x_k).
double plug_in_success(const Belief& belief, const Eigen::VectorXd& x, int preferred_label);

int epsilon_greedy_select(std::span<const Belief> beliefs, const ContextBundle& contexts,
                          int preferred_label, double epsilon, Rng& rng);

/// UCB1 on the binary reward; unvisited options first, in index order.
int ucb_select(const PolicyState& state);

/// Draws w.p. w_u a mixand, then Theta ~ N(mu_u, S_u), per option; argmax of
/// the sampled success probability.
int thompson_select(std::span<const Belief> beliefs, const ContextBundle& contexts,
                    int preferred_label, Rng& rng);

/// argmin of expected free energy, lowest index on ties.
Selection aif_select(std::span<const Belief> beliefs, const ContextBundle& contexts,
                     const EvolutionaryPrior& ev);

/// Samples Theta from one Gaussian mixture.
Eigen::VectorXd sample_belief(const Belief& belief, Rng& rng);

struct SelectionInputs {
  std::span<const Belief> beliefs;
  const EnvironmentTruth* env = nullptr;
  const PolicyState* state = nullptr;
  Rng* rng = nullptr;
};

Selection select_option(const PolicyConfig& cfg, const SelectionInputs& in);

}  // namespace oacmab
