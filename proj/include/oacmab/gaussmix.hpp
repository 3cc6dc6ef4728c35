#pragma once

#include "oacmab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oacmab {

/// Raised when a covariance or precision matrix fails Cholesky factorization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Scalar>
Scalar log_two_pi() {
  return static_cast<Scalar>(std::log(2.0 * std::numbers::pi));
}

template <class Scalar>
Scalar log_det_from_llt(const Eigen::LLT<Matrix<Scalar>>& llt) {
  using std::log;
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

/// One weighted Gaussian mixand. Symmetrizes the covariance and caches its
/// Cholesky factor, log determinant and precision.
template <class Scalar>
class GaussianComponent {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  GaussianComponent(VectorType mean, MatrixType cov, Scalar log_weight = Scalar(0))
      : mean_(std::move(mean)), cov_(std::move(cov)), log_weight_(log_weight) {
    using std::abs;
    using std::isfinite;
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size() || mean_.size() == 0) {
      throw std::invalid_argument("GaussianComponent: covariance shape does not match mean length");
    }
    if (!mean_.allFinite() || !cov_.allFinite()) {
      throw std::invalid_argument("GaussianComponent: non-finite mean or covariance");
    }
    if (!isfinite(log_weight_)) throw std::invalid_argument("GaussianComponent: non-finite log weight");
    const Scalar asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    const Scalar scale = std::max(Scalar(1), cov_.cwiseAbs().maxCoeff());
    if (asym > Scalar(1e-10) * scale) {
      throw std::invalid_argument("GaussianComponent: covariance is not symmetric");
    }
    cov_ = (cov_ + cov_.transpose()).eval() / Scalar(2);
    chol_.compute(cov_);
    if (chol_.info() != Eigen::Success) {
      throw NumericError("GaussianComponent: covariance is not positive definite");
    }
    log_det_ = log_det_from_llt(chol_);
    precision_ = chol_.solve(MatrixType::Identity(dim(), dim()));
    precision_ = (precision_ + precision_.transpose()).eval() / Scalar(2);
  }

  Eigen::Index dim() const { return mean_.size(); }
  const VectorType& mean() const { return mean_; }
  const MatrixType& cov() const { return cov_; }
  const MatrixType& precision() const { return precision_; }
  const Eigen::LLT<MatrixType>& cholesky() const { return chol_; }
  Scalar log_det_cov() const { return log_det_; }
  Scalar log_weight() const { return log_weight_; }
  Scalar weight() const {
    using std::exp;
    return exp(log_weight_);
  }

  GaussianComponent with_log_weight(Scalar log_weight) const {
    using std::isfinite;
    if (!isfinite(log_weight)) throw std::invalid_argument("GaussianComponent: non-finite log weight");
    GaussianComponent copy = *this;
    copy.log_weight_ = log_weight;
    return copy;
  }

  /// log N(theta; mean, cov), ignoring the weight.
  template <class Derived>
  Scalar log_density(const Eigen::MatrixBase<Derived>& theta) const {
    if (theta.size() != dim()) throw std::invalid_argument("GaussianComponent: dimension mismatch");
    const VectorType white = chol_.matrixL().solve(VectorType(theta - mean_));
    return -Scalar(0.5) * (static_cast<Scalar>(dim()) * log_two_pi<Scalar>() + log_det_ +
                           white.squaredNorm());
  }

 private:
  VectorType mean_;
  MatrixType cov_;
  Scalar log_weight_;
  Eigen::LLT<MatrixType> chol_;
  Scalar log_det_ = Scalar(0);
  MatrixType precision_;
};

/// Weight-normalized Gaussian mixture over one option's flattened Theta.
template <class Scalar>
class ParameterBelief {
 public:
  using Component = GaussianComponent<Scalar>;

  ParameterBelief(int option, std::vector<Component> components)
      : option_(option), components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("ParameterBelief: no components");
    const Eigen::Index d = components_.front().dim();
    Vector<Scalar> logw(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t u = 0; u < components_.size(); ++u) {
      if (components_[u].dim() != d) {
        throw std::invalid_argument("ParameterBelief: components differ in dimension");
      }
      logw(static_cast<Eigen::Index>(u)) = components_[u].log_weight();
    }
    const Scalar total = log_sum_exp(logw);
    for (auto& c : components_) c = c.with_log_weight(c.log_weight() - total);
  }

  int option() const { return option_; }
  Eigen::Index dim() const { return components_.front().dim(); }
  std::size_t size() const { return components_.size(); }
  const std::vector<Component>& components() const { return components_; }
  const Component& operator[](std::size_t u) const { return components_[u]; }

  Vector<Scalar> weights() const {
    Vector<Scalar> w(static_cast<Eigen::Index>(size()));
    for (std::size_t u = 0; u < size(); ++u) w(static_cast<Eigen::Index>(u)) = components_[u].weight();
    return w;
  }

 private:
  int option_;
  std::vector<Component> components_;
};

/// Natural parameters of a Gaussian: density = exp(c + l^T theta - 1/2 theta^T Q theta).
template <class Scalar>
struct NaturalParams {
  Scalar const_term;
  Vector<Scalar> lin_term;
  Matrix<Scalar> quad_term;

  template <class Derived>
  Scalar log_density(const Eigen::MatrixBase<Derived>& theta) const {
    return const_term + lin_term.dot(theta) - Scalar(0.5) * theta.dot(quad_term * theta);
  }
};

/// Natural parameters from a mean and a precision given with its log determinant.
template <class Scalar>
NaturalParams<Scalar> natural_from_precision(const Vector<Scalar>& mean,
                                             const Matrix<Scalar>& precision,
                                             Scalar log_det_precision) {
  const Vector<Scalar> lin = precision * mean;
  const Scalar d = static_cast<Scalar>(mean.size());
  const Scalar c =
      -Scalar(0.5) * mean.dot(lin) - Scalar(0.5) * (d * log_two_pi<Scalar>() - log_det_precision);
  return {c, lin, precision};
}

template <class Scalar>
NaturalParams<Scalar> to_natural(const GaussianComponent<Scalar>& g) {
  return natural_from_precision<Scalar>(g.mean(), g.precision(), -g.log_det_cov());
}

template <class Scalar>
GaussianComponent<Scalar> from_natural(const NaturalParams<Scalar>& nat, Scalar log_weight = Scalar(0)) {
  Eigen::LLT<Matrix<Scalar>> llt(nat.quad_term);
  if (llt.info() != Eigen::Success) {
    throw NumericError("from_natural: quadratic term is not positive definite");
  }
  const Eigen::Index d = nat.lin_term.size();
  Matrix<Scalar> cov = llt.solve(Matrix<Scalar>::Identity(d, d));
  cov = (cov + cov.transpose()).eval() / Scalar(2);
  return GaussianComponent<Scalar>(llt.solve(nat.lin_term), cov, log_weight);
}

/// Collapses weighted components into one Gaussian with the same first two
/// moments. The result carries the summed (unnormalized) weight.
template <class Scalar>
GaussianComponent<Scalar> moment_match(std::span<const GaussianComponent<Scalar>> components) {
  using std::exp;
  using std::isinf;
  if (components.empty()) throw std::invalid_argument("moment_match: empty component list");
  const Eigen::Index d = components.front().dim();
  Vector<Scalar> logw(static_cast<Eigen::Index>(components.size()));
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].dim() != d) throw std::invalid_argument("moment_match: dimension mismatch");
    logw(static_cast<Eigen::Index>(i)) = components[i].log_weight();
  }
  const Scalar total = log_sum_exp(logw);
  if (isinf(total)) throw std::invalid_argument("moment_match: all weights are zero");

  Vector<Scalar> mean = Vector<Scalar>::Zero(d);
  for (std::size_t i = 0; i < components.size(); ++i) {
    mean += exp(logw(static_cast<Eigen::Index>(i)) - total) * components[i].mean();
  }
  Matrix<Scalar> cov = Matrix<Scalar>::Zero(d, d);
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Scalar w = exp(logw(static_cast<Eigen::Index>(i)) - total);
    const Vector<Scalar> diff = components[i].mean() - mean;
    cov += w * (components[i].cov() + diff * diff.transpose());
  }
  return GaussianComponent<Scalar>(mean, cov, total);
}

template <class Scalar>
GaussianComponent<Scalar> moment_match(const std::vector<GaussianComponent<Scalar>>& components) {
  return moment_match(std::span<const GaussianComponent<Scalar>>(components));
}

/// Runnalls' upper bound on the KL cost of merging components a and b:
/// 1/2 [(w_a + w_b) log det S_ab - w_a log det S_a - w_b log det S_b].
template <class Scalar>
Scalar runnalls_cost(const GaussianComponent<Scalar>& a, const GaussianComponent<Scalar>& b) {
  const std::vector<GaussianComponent<Scalar>> pair{a, b};
  const GaussianComponent<Scalar> merged = moment_match(pair);
  return Scalar(0.5) * (merged.weight() * merged.log_det_cov() - a.weight() * a.log_det_cov() -
                        b.weight() * b.log_det_cov());
}

inline constexpr double kWeightFloor = 1e-12;

/// Drops components whose normalized weight is below `floor` and renormalizes.
template <class Scalar>
ParameterBelief<Scalar> prune_weights(const ParameterBelief<Scalar>& belief,
                                      Scalar floor = static_cast<Scalar>(kWeightFloor)) {
  std::vector<GaussianComponent<Scalar>> kept;
  kept.reserve(belief.size());
  for (const auto& c : belief.components()) {
    if (c.weight() >= floor) kept.push_back(c);
  }
  return ParameterBelief<Scalar>(belief.option(), std::move(kept));
}

/// Greedy pairwise Runnalls reduction down to at most `max_components`.
/// Ties are broken by the lexicographically smallest pair (i, j).
template <class Scalar>
ParameterBelief<Scalar> runnalls_reduce(const ParameterBelief<Scalar>& belief,
                                        std::size_t max_components) {
  if (max_components < 1) throw std::invalid_argument("runnalls_reduce: max_components must be >= 1");
  if (belief.size() <= max_components) return belief;

  std::vector<GaussianComponent<Scalar>> comps = prune_weights(belief).components();
  std::size_t n = comps.size();
  // cost(i, j) for i < j; recomputed only for pairs touching a merged component.
  std::vector<std::vector<Scalar>> cost(n, std::vector<Scalar>(n, Scalar(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) cost[i][j] = runnalls_cost(comps[i], comps[j]);
  }
  while (n > max_components) {
    std::size_t bi = 0;
    std::size_t bj = 1;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (cost[i][j] < best) {
          best = cost[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    const std::vector<GaussianComponent<Scalar>> pair{comps[bi], comps[bj]};
    comps[bi] = moment_match(pair);
    comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(bj));
    cost.erase(cost.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : cost) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    --n;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < bi) cost[i][bi] = runnalls_cost(comps[i], comps[bi]);
      if (i > bi) cost[bi][i] = runnalls_cost(comps[bi], comps[i]);
    }
  }
  return ParameterBelief<Scalar>(belief.option(), std::move(comps));
}

template <class Scalar, class Derived>
Scalar mixture_log_pdf(const ParameterBelief<Scalar>& belief,
                       const Eigen::MatrixBase<Derived>& theta) {
  if (theta.size() != belief.dim()) throw std::invalid_argument("mixture_log_pdf: dimension mismatch");
  Vector<Scalar> terms(static_cast<Eigen::Index>(belief.size()));
  for (std::size_t u = 0; u < belief.size(); ++u) {
    terms(static_cast<Eigen::Index>(u)) = belief[u].log_weight() + belief[u].log_density(theta);
  }
  return log_sum_exp(terms);
}

template <class Scalar>
Vector<Scalar> mixture_mean(const ParameterBelief<Scalar>& belief) {
  Vector<Scalar> mean = Vector<Scalar>::Zero(belief.dim());
  for (const auto& c : belief.components()) mean += c.weight() * c.mean();
  return mean;
}

template <class Scalar>
Matrix<Scalar> mixture_cov(const ParameterBelief<Scalar>& belief) {
  return moment_match(belief.components()).cov();
}

using Gaussian = GaussianComponent<double>;
using Belief = ParameterBelief<double>;

}  // namespace oacmab
