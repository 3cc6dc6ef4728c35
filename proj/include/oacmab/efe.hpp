#pragma once

#include "oacmab/laplace.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace oacmab {

/// Preference measure p_ev(o) over labels. Entries must be positive; they are
/// not required to sum to one.
class EvolutionaryPrior {
 public:
  EvolutionaryPrior() = default;
  explicit EvolutionaryPrior(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) throw std::invalid_argument("EvolutionaryPrior: need at least two labels");
    if (!probs_.allFinite() || (probs_.array() <= 0.0).any()) {
      throw std::invalid_argument("EvolutionaryPrior: entries must be finite and > 0");
    }
  }

  /// `preferred` for the preferred label, `other` for every other label.
  static EvolutionaryPrior preferring(int labels, int preferred_label, double preferred = 1.0,
                                     double other = 0.01) {
    if (preferred_label < 0 || preferred_label >= labels) {
      throw std::out_of_range("EvolutionaryPrior: preferred label out of range");
    }
    Eigen::VectorXd p = Eigen::VectorXd::Constant(labels, other);
    p(preferred_label) = preferred;
    return EvolutionaryPrior(std::move(p));
  }

  int labels() const { return static_cast<int>(probs_.size()); }
  double operator()(int label) const { return probs_(label); }
  const Eigen::VectorXd& probs() const { return probs_; }

 private:
  Eigen::VectorXd probs_;
};

/// p(o | Theta) ~= exp(g + h^T Theta - 1/2 Theta^T K Theta).
template <class Scalar>
struct LikelihoodExpForm {
  Scalar g_const;
  Vector<Scalar> h_lin;
  Matrix<Scalar> k_quad;

  template <class Derived>
  Scalar log_value(const Eigen::MatrixBase<Derived>& theta) const {
    return g_const + h_lin.dot(theta) - Scalar(0.5) * theta.dot(k_quad * theta);
  }
};

struct OutcomeTerms {
  int outcome = 0;
  double q = 0.0;
  double term1 = 0.0;  // risk part: q(o) log(q(o) / p_ev(o))
  double term2 = 0.0;  // sum_u w_u C_u E_post_u[log-likelihood form]
};

struct EfeScore {
  int option = 0;
  double total = 0.0;
  std::vector<OutcomeTerms> per_outcome;
};

template <class Scalar>
struct PredictiveProb {
  Scalar q;
  std::vector<LaplaceResult<Scalar>> mixands;
};

/// q(o) = sum_u w_u C_u(o), keeping the per-mixand Laplace fits.
template <class Scalar, class XDerived>
PredictiveProb<Scalar> predictive_prob(const ParameterBelief<Scalar>& belief, int outcome,
                                       const Eigen::MatrixBase<XDerived>& x,
                                       const LaplaceOptions& opts = {}) {
  using std::exp;
  PredictiveProb<Scalar> out{Scalar(0), batch_laplace(belief, outcome, x, opts)};
  for (std::size_t u = 0; u < belief.size(); ++u) {
    out.q += exp(belief[u].log_weight() + out.mixands[u].log_evidence);
  }
  return out;
}

template <class Scalar>
LikelihoodExpForm<Scalar> likelihood_exp_form(const NaturalParams<Scalar>& prior_nat,
                                              const NaturalParams<Scalar>& post_nat,
                                              Scalar log_evidence) {
  Matrix<Scalar> k = post_nat.quad_term - prior_nat.quad_term;
  k = (k + k.transpose()).eval() / Scalar(2);
  return {post_nat.const_term + log_evidence - prior_nat.const_term,
          post_nat.lin_term - prior_nat.lin_term, std::move(k)};
}

/// E[g + h^T Theta - 1/2 Theta^T K Theta] for Theta ~ N(mean, cov).
template <class Scalar>
Scalar expected_quadratic(const Vector<Scalar>& mean, const Matrix<Scalar>& cov,
                          const LikelihoodExpForm<Scalar>& form) {
  if (mean.size() != form.h_lin.size() || cov.rows() != mean.size()) {
    throw std::invalid_argument("expected_quadratic: dimension mismatch");
  }
  return form.g_const + form.h_lin.dot(mean) -
         Scalar(0.5) * (mean.dot(form.k_quad * mean) + (form.k_quad * cov).trace());
}

template <class Scalar>
Scalar expected_quadratic(const GaussianComponent<Scalar>& g, const LikelihoodExpForm<Scalar>& form) {
  return expected_quadratic(g.mean(), g.cov(), form);
}

/// Expected free energy of one option: sum over outcomes of
/// q(o) log(q(o)/p_ev(o)) minus sum_u w_u C_u E_post_u[log-likelihood form].
template <class Scalar, class XDerived>
EfeScore efe(const ParameterBelief<Scalar>& belief, const Eigen::MatrixBase<XDerived>& x,
             const EvolutionaryPrior& ev, const LaplaceOptions& opts = {}) {
  using std::exp;
  using std::log;
  const Eigen::Index c = x.size();
  if (c < 1 || belief.dim() % c != 0 || belief.dim() / c != ev.labels()) {
    throw std::invalid_argument("efe: belief dimension, context length and preference size disagree");
  }
  std::vector<NaturalParams<Scalar>> prior_nat;
  prior_nat.reserve(belief.size());
  for (const auto& comp : belief.components()) prior_nat.push_back(to_natural(comp));

  EfeScore score;
  score.option = belief.option();
  for (int o = 0; o < ev.labels(); ++o) {
    const PredictiveProb<Scalar> pred = predictive_prob(belief, o, x, opts);
    const Scalar q = pred.q;
    const Scalar term1 = q * log(q / static_cast<Scalar>(ev(o)));
    Scalar term2(0);
    for (std::size_t u = 0; u < belief.size(); ++u) {
      const LaplaceResult<Scalar>& fit = pred.mixands[u];
      const LikelihoodExpForm<Scalar> form =
          likelihood_exp_form(prior_nat[u], fit.natural(), fit.log_evidence);
      term2 += exp(belief[u].log_weight() + fit.log_evidence) *
               expected_quadratic(fit.post_mean, fit.post_cov, form);
    }
    score.per_outcome.push_back({o, static_cast<double>(q), static_cast<double>(term1),
                                 static_cast<double>(term2)});
    score.total += static_cast<double>(term1 - term2);
  }
  return score;
}

}  // namespace oacmab
