#pragma once

// JSON forms of the domain records. Option and label indices are 1-based in
// every document; the C++ API is 0-based.

#include "oacmab/efe.hpp"
#include "oacmab/env.hpp"
#include "oacmab/gaussmix.hpp"
#include "oacmab/model.hpp"

#include <nlohmann/json.hpp>

namespace oacmab {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);
json matrix_to_json(const Eigen::MatrixXd& m);  // list of rows
Eigen::MatrixXd matrix_from_json(const json& j);

/// Keys: k, c, f, f_p, theta_true (K matrices of C rows x F columns),
/// x_shared, x_per_option, psi.
json environment_to_json(const EnvironmentTruth& env);
EnvironmentTruth environment_from_json(const json& j);

/// {option, components: [{log_weight, mean, cov}]}
json belief_to_json(const Belief& belief);
Belief belief_from_json(const json& j);

/// {option, total, per_outcome: [{o, q, term1, term2}]}
json efe_to_json(const EfeScore& score);

/// {step, option, source, label, gamma0, gamma1, lambda, components_before,
///  components_after, emitted_step, arrival_step}; gammas are null for naive fusion.
json fusion_to_json(const FusionRecord& rec);

json step_to_json(const StepRecord& rec);

}  // namespace oacmab
