#pragma once

#include "oacmab/laplace.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace oacmab {

/// Posterior probabilities that an external observation is incorrect (gamma0)
/// or correct (gamma1).
struct AssociationPosterior {
  double gamma0 = 0.0;
  double gamma1 = 1.0;
};

struct FusionConfig {
  double fp_rate = 0.0;  // prior p(zeta = 0)
  int label_count = 2;
  std::size_t reduction_threshold = 10;

  void validate() const {
    if (!(fp_rate >= 0.0 && fp_rate <= 1.0)) throw std::invalid_argument("FusionConfig: fp_rate outside [0, 1]");
    if (label_count < 2) throw std::invalid_argument("FusionConfig: label_count must be >= 2");
    if (reduction_threshold < 1) throw std::invalid_argument("FusionConfig: reduction_threshold must be >= 1");
  }
};

template <class Scalar>
struct NaiveUpdate {
  ParameterBelief<Scalar> posterior;
  Scalar lambda;  // sum_u w_u C_u under the pre-update weights
};

/// Bayes update of every mixand with a trusted observation; weights become
/// w_u C_u / Lambda.
template <class Scalar, class XDerived>
NaiveUpdate<Scalar> naive_update(const ParameterBelief<Scalar>& belief, int label,
                                 const Eigen::MatrixBase<XDerived>& x,
                                 const LaplaceOptions& opts = {}) {
  using std::exp;
  using std::isfinite;
  const auto results = batch_laplace(belief, label, x, opts);
  Vector<Scalar> logw(static_cast<Eigen::Index>(belief.size()));
  for (std::size_t u = 0; u < belief.size(); ++u) {
    logw(static_cast<Eigen::Index>(u)) = belief[u].log_weight() + results[u].log_evidence;
  }
  const Scalar log_lambda = log_sum_exp(logw);
  const Scalar lambda = exp(log_lambda);
  if (!isfinite(log_lambda) || !(lambda > Scalar(0))) {
    throw NumericError("naive_update: non-positive observation evidence");
  }
  std::vector<GaussianComponent<Scalar>> comps;
  comps.reserve(belief.size());
  for (std::size_t u = 0; u < belief.size(); ++u) {
    comps.push_back(results[u].posterior(logw(static_cast<Eigen::Index>(u)) - log_lambda));
  }
  return {ParameterBelief<Scalar>(belief.option(), std::move(comps)), lambda};
}

/// gamma0 = (FP/F) / (FP/F + (1 - FP) Lambda), gamma1 = (1 - FP) Lambda / (same).
inline AssociationPosterior association_probabilities(double lambda, const FusionConfig& cfg) {
  cfg.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("association_probabilities: lambda must be positive");
  }
  const double fault = cfg.fp_rate / static_cast<double>(cfg.label_count);
  const double valid = (1.0 - cfg.fp_rate) * lambda;
  const double norm = fault + valid;
  return {fault / norm, valid / norm};
}

template <class Scalar>
struct PsdaUpdate {
  ParameterBelief<Scalar> belief;
  AssociationPosterior association;
  Scalar lambda;
  std::size_t components_before;  // 2M stacked mixands
  std::size_t components_after;
};

/// Stacks gamma0-weighted prior mixands with gamma1-weighted naive-posterior
/// mixands, drops mixands below the weight floor, then Runnalls-reduces to
/// cfg.reduction_threshold.
template <class Scalar, class XDerived>
PsdaUpdate<Scalar> psda_update(const ParameterBelief<Scalar>& belief, int label,
                               const Eigen::MatrixBase<XDerived>& x, const FusionConfig& cfg,
                               const LaplaceOptions& opts = {}) {
  using std::log;
  cfg.validate();
  const NaiveUpdate<Scalar> naive = naive_update(belief, label, x, opts);
  const AssociationPosterior gamma =
      association_probabilities(static_cast<double>(naive.lambda), cfg);

  std::vector<GaussianComponent<Scalar>> stacked;
  stacked.reserve(2 * belief.size());
  const Scalar floor = static_cast<Scalar>(kWeightFloor);
  auto append = [&](const ParameterBelief<Scalar>& part, double g) {
    for (const auto& c : part.components()) {
      const Scalar w = static_cast<Scalar>(g) * c.weight();
      if (w >= floor) stacked.push_back(c.with_log_weight(log(static_cast<Scalar>(g)) + c.log_weight()));
    }
  };
  append(belief, gamma.gamma0);
  append(naive.posterior, gamma.gamma1);

  ParameterBelief<Scalar> merged(belief.option(), std::move(stacked));
  ParameterBelief<Scalar> reduced = runnalls_reduce(merged, cfg.reduction_threshold);
  const std::size_t after = reduced.size();
  return {std::move(reduced), gamma, naive.lambda, 2 * belief.size(), after};
}

}  // namespace oacmab
