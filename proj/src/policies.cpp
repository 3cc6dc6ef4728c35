#include "oacmab/policies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oacmab {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::oracle: return "oracle";
    case PolicyKind::epsilon_greedy: return "egreedy";
    case PolicyKind::ucb: return "ucb";
    case PolicyKind::thompson: return "ts";
    case PolicyKind::active_inference: return "aif";
  }
  return "unknown";
}

PolicyKind parse_policy(std::string_view name) {
  if (name == "oracle") return PolicyKind::oracle;
  if (name == "egreedy") return PolicyKind::epsilon_greedy;
  if (name == "ucb") return PolicyKind::ucb;
  if (name == "ts") return PolicyKind::thompson;
  if (name == "aif") return PolicyKind::active_inference;
  throw std::invalid_argument("unknown policy '" + std::string(name) +
                              "' (expected oracle, egreedy, ucb, ts or aif)");
}

namespace {

int argmax_lowest(const std::vector<double>& values) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k) {
    if (values[static_cast<std::size_t>(k)] > values[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

void check_beliefs(std::span<const Belief> beliefs, const ContextBundle& contexts) {
  if (beliefs.size() != static_cast<std::size_t>(contexts.options())) {
    throw std::invalid_argument("policy: belief count does not match option count");
  }
}

}  // namespace

int oracle_select(const EnvironmentTruth& env) {
  return argmax_lowest(std::vector<double>(env.psi.data(), env.psi.data() + env.psi.size()));
}

double plug_in_success(const Belief& belief, const Eigen::VectorXd& x, int preferred_label) {
  return softmax_likelihood(unflatten(mixture_mean(belief), x.size()), preferred_label, x);
}

int epsilon_greedy_select(std::span<const Belief> beliefs, const ContextBundle& contexts,
                          int preferred_label, double epsilon, Rng& rng) {
  check_beliefs(beliefs, contexts);
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon outside [0, 1]");
  const int k = contexts.options();
  if (uniform01(rng) < epsilon) {
    return std::uniform_int_distribution<int>(0, k - 1)(rng);
  }
  std::vector<double> score(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    score[static_cast<std::size_t>(i)] =
        plug_in_success(beliefs[static_cast<std::size_t>(i)], contexts.effective(i), preferred_label);
  }
  return argmax_lowest(score);
}

int ucb_select(const PolicyState& state) {
  const int k = state.options();
  for (int i = 0; i < k; ++i) {
    if (state.count(i) == 0) return i;
  }
  const double log_t = std::log(static_cast<double>(state.step()));
  std::vector<double> score(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    score[static_cast<std::size_t>(i)] =
        state.mean_reward(i) + std::sqrt(2.0 * log_t / static_cast<double>(state.count(i)));
  }
  return argmax_lowest(score);
}

Eigen::VectorXd sample_belief(const Belief& belief, Rng& rng) {
  const Eigen::VectorXd w = belief.weights();
  const int u = label_from_uniform(w / w.sum(), uniform01(rng));
  const Gaussian& g = belief[static_cast<std::size_t>(u)];
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(g.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return g.mean() + g.cholesky().matrixL() * z;
}

int thompson_select(std::span<const Belief> beliefs, const ContextBundle& contexts,
                    int preferred_label, Rng& rng) {
  check_beliefs(beliefs, contexts);
  std::vector<double> score(beliefs.size());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    const Eigen::VectorXd x = contexts.effective(static_cast<int>(k));
    const Eigen::VectorXd theta = sample_belief(beliefs[k], rng);
    score[k] = softmax_likelihood(unflatten(theta, x.size()), preferred_label, x);
  }
  return argmax_lowest(score);
}

Selection aif_select(std::span<const Belief> beliefs, const ContextBundle& contexts,
                     const EvolutionaryPrior& ev) {
  check_beliefs(beliefs, contexts);
  Selection out;
  out.efe.reserve(beliefs.size());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    out.efe.push_back(efe(beliefs[k], contexts.effective(static_cast<int>(k)), ev));
    out.efe.back().option = static_cast<int>(k);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : out.efe) {
    if (s.total < best) {
      best = s.total;
      out.option = s.option;
    }
  }
  return out;
}

Selection select_option(const PolicyConfig& cfg, const SelectionInputs& in) {
  if (in.env == nullptr) throw std::invalid_argument("select_option: missing environment");
  const int fp = in.env->preferred_label;
  switch (cfg.kind) {
    case PolicyKind::oracle:
      return {oracle_select(*in.env), {}};
    case PolicyKind::epsilon_greedy:
      return {epsilon_greedy_select(in.beliefs, in.env->context, fp, cfg.epsilon, *in.rng), {}};
    case PolicyKind::ucb:
      return {ucb_select(*in.state), {}};
    case PolicyKind::thompson:
      return {thompson_select(in.beliefs, in.env->context, fp, *in.rng), {}};
    case PolicyKind::active_inference:
      return aif_select(in.beliefs, in.env->context, cfg.preference);
  }
  throw std::invalid_argument("select_option: unknown policy kind");
}

}  // namespace oacmab
