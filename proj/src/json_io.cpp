#include "oacmab/json_io.hpp"

#include <stdexcept>

namespace oacmab {

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix JSON must be a nonempty list of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_from_json(j.at(static_cast<std::size_t>(r)));
    if (row.size() != cols) throw std::invalid_argument("matrix JSON rows differ in length");
    m.row(r) = row.transpose();
  }
  return m;
}

json environment_to_json(const EnvironmentTruth& env) {
  json theta = json::array();
  for (const auto& t : env.theta_true) theta.push_back(matrix_to_json(t));
  json per_option = json::array();
  for (const auto& x : env.context.per_option()) per_option.push_back(vector_to_json(x));
  return {{"k", env.options},
          {"c", env.contexts},
          {"f", env.labels},
          {"f_p", env.preferred_label + 1},
          {"theta_true", theta},
          {"x_shared", vector_to_json(env.context.shared())},
          {"x_per_option", per_option},
          {"psi", vector_to_json(env.psi)}};
}

EnvironmentTruth environment_from_json(const json& j) {
  std::vector<ParameterMatrix<double>> theta;
  for (const auto& t : j.at("theta_true")) theta.push_back(matrix_from_json(t));
  std::vector<Eigen::VectorXd> per_option;
  for (const auto& x : j.at("x_per_option")) per_option.push_back(vector_from_json(x));
  EnvironmentTruth env = make_environment(
      std::move(theta), ContextBundle(vector_from_json(j.at("x_shared")), std::move(per_option)),
      j.at("f_p").get<int>() - 1);
  if (env.options != j.at("k").get<int>() || env.contexts != j.at("c").get<int>() ||
      env.labels != j.at("f").get<int>()) {
    throw std::invalid_argument("environment JSON: k/c/f do not match the stored arrays");
  }
  return env;
}

json belief_to_json(const Belief& belief) {
  json comps = json::array();
  for (const auto& c : belief.components()) {
    comps.push_back({{"log_weight", c.log_weight()},
                     {"mean", vector_to_json(c.mean())},
                     {"cov", matrix_to_json(c.cov())}});
  }
  return {{"option", belief.option() + 1}, {"components", comps}};
}

Belief belief_from_json(const json& j) {
  std::vector<Gaussian> comps;
  for (const auto& c : j.at("components")) {
    comps.emplace_back(vector_from_json(c.at("mean")), matrix_from_json(c.at("cov")),
                       c.at("log_weight").get<double>());
  }
  return Belief(j.at("option").get<int>() - 1, std::move(comps));
}

json efe_to_json(const EfeScore& score) {
  json outcomes = json::array();
  for (const auto& o : score.per_outcome) {
    outcomes.push_back({{"o", o.outcome + 1}, {"q", o.q}, {"term1", o.term1}, {"term2", o.term2}});
  }
  return {{"option", score.option + 1}, {"total", score.total}, {"per_outcome", outcomes}};
}

json fusion_to_json(const FusionRecord& rec) {
  json j = {{"step", rec.step},
            {"option", rec.observation.option + 1},
            {"source", rec.observation.source == ObservationSource::internal ? "internal" : "external"},
            {"label", rec.observation.label + 1},
            {"gamma0", nullptr},
            {"gamma1", nullptr},
            {"lambda", rec.lambda},
            {"components_before", rec.components_before},
            {"components_after", rec.components_after},
            {"emitted_step", rec.observation.emitted_step},
            {"arrival_step", rec.observation.arrival_step}};
  if (rec.association) {
    j["gamma0"] = rec.association->gamma0;
    j["gamma1"] = rec.association->gamma1;
  }
  return j;
}

json step_to_json(const StepRecord& rec) {
  json fusions = json::array();
  for (const auto& f : rec.fusions) fusions.push_back(fusion_to_json(f));
  return {{"schema_version", kTrajectorySchemaVersion},
          {"step", rec.step},
          {"option", rec.option + 1},
          {"internal_label", rec.internal_label + 1},
          {"reward", rec.reward},
          {"instant_regret", rec.instant_regret},
          {"cumulative_regret", rec.cumulative_regret},
          {"belief_error", rec.belief_error},
          {"fusions", fusions}};
}

}  // namespace oacmab
