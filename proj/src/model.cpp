#include "oacmab/model.hpp"

namespace oacmab {

EnvironmentTruth make_environment(std::vector<ParameterMatrix<double>> theta_true,
                                  ContextBundle context, int preferred_label) {
  if (theta_true.size() != static_cast<std::size_t>(context.options())) {
    throw std::invalid_argument("make_environment: parameter count does not match option count");
  }
  if (theta_true.empty() || theta_true.front().cols() < 2) {
    throw std::invalid_argument("make_environment: need at least two labels");
  }
  EnvironmentTruth env;
  env.options = context.options();
  env.contexts = static_cast<int>(context.dim());
  env.labels = static_cast<int>(theta_true.front().cols());
  for (const auto& theta : theta_true) {
    if (theta.rows() != env.contexts || theta.cols() != env.labels) {
      throw std::invalid_argument("make_environment: inconsistent parameter matrix shape");
    }
    if (!theta.allFinite()) throw std::invalid_argument("make_environment: non-finite parameter");
  }
  if (preferred_label < 0 || preferred_label >= env.labels) {
    throw std::out_of_range("make_environment: preferred label out of range");
  }
  env.preferred_label = preferred_label;
  env.theta_true = std::move(theta_true);
  env.context = std::move(context);
  env.psi = success_probabilities(env.theta_true, env.context, env.preferred_label);
  return env;
}

EnvironmentTruth generate_environment(int options, int contexts, int labels, int preferred_label,
                                      std::uint64_t seed) {
  if (options < 2 || contexts < 1 || labels < 2) {
    throw std::invalid_argument("generate_environment: need K >= 2, C >= 1, F >= 2");
  }
  if (preferred_label < 0 || preferred_label >= labels) {
    throw std::out_of_range("generate_environment: preferred label out of range");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<ParameterMatrix<double>> theta(static_cast<std::size_t>(options));
  for (auto& t : theta) {
    t.resize(contexts, labels);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = unit(rng);
  }
  Eigen::VectorXd shared(contexts);
  for (Eigen::Index i = 0; i < contexts; ++i) shared(i) = coin(rng) ? 1.0 : 0.0;
  std::vector<Eigen::VectorXd> per_option(static_cast<std::size_t>(options),
                                          Eigen::VectorXd(contexts));
  for (auto& v : per_option) {
    for (Eigen::Index i = 0; i < contexts; ++i) v(i) = coin(rng) ? 1.0 : 0.0;
  }
  return make_environment(std::move(theta), ContextBundle(std::move(shared), std::move(per_option)),
                          preferred_label);
}

}  // namespace oacmab
