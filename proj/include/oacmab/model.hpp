#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace oacmab {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Theta_k: C x F, column h holds the weights of label h.
template <class Scalar>
using ParameterMatrix = Matrix<Scalar>;

using Rng = std::mt19937_64;

/// Flattens a parameter matrix label block by label block (all C entries of
/// label 0, then label 1, ...). Every Gaussian over Theta uses this order.
template <class Derived>
Vector<typename Derived::Scalar> flatten(const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  const ParameterMatrix<Scalar> dense = theta;
  return Eigen::Map<const Vector<Scalar>>(dense.data(), dense.size());
}

template <class Derived>
ParameterMatrix<typename Derived::Scalar> unflatten(const Eigen::MatrixBase<Derived>& flat,
                                                    Eigen::Index contexts) {
  using Scalar = typename Derived::Scalar;
  if (contexts < 1 || flat.size() % contexts != 0) {
    throw std::invalid_argument("unflatten: length " + std::to_string(flat.size()) +
                                " is not a multiple of context dimension " +
                                std::to_string(contexts));
  }
  const Vector<Scalar> dense = flat;
  return Eigen::Map<const ParameterMatrix<Scalar>>(dense.data(), contexts,
                                                    dense.size() / contexts);
}

/// Softmax of a logit vector with max-logit subtraction.
template <class Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using std::exp;
  using Scalar = typename Derived::Scalar;
  const Scalar top = logits.maxCoeff();
  Vector<Scalar> p = (logits.array() - top).exp().matrix();
  p /= p.sum();
  return p;
}

template <class Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& values) {
  using std::exp;
  using std::isinf;
  using std::log;
  using Scalar = typename Derived::Scalar;
  const Scalar top = values.maxCoeff();
  if (isinf(top)) return top;
  return top + log((values.array() - top).exp().sum());
}

/// Label logits Theta_h^T x for every label h.
template <class ThetaDerived, class XDerived>
Vector<typename ThetaDerived::Scalar> label_logits(const Eigen::MatrixBase<ThetaDerived>& theta,
                                                   const Eigen::MatrixBase<XDerived>& x) {
  if (theta.rows() != x.size()) {
    throw std::invalid_argument("softmax model: context length " + std::to_string(x.size()) +
                                " does not match parameter rows " +
                                std::to_string(theta.rows()));
  }
  return theta.transpose() * x;
}

/// Full label distribution p(o = h | Theta, x) for h = 0..F-1.
template <class ThetaDerived, class XDerived>
Vector<typename ThetaDerived::Scalar> softmax_probabilities(
    const Eigen::MatrixBase<ThetaDerived>& theta, const Eigen::MatrixBase<XDerived>& x) {
  return softmax(label_logits(theta, x));
}

template <class ThetaDerived, class XDerived>
typename ThetaDerived::Scalar softmax_likelihood(const Eigen::MatrixBase<ThetaDerived>& theta,
                                                 int label,
                                                 const Eigen::MatrixBase<XDerived>& x) {
  if (label < 0 || label >= theta.cols()) {
    throw std::out_of_range("softmax_likelihood: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(theta.cols()) + ")");
  }
  return softmax_probabilities(theta, x)(label);
}

/// Inverse-CDF draw of a label from `probs` using the uniform variate `u`.
template <class Derived>
int label_from_uniform(const Eigen::MatrixBase<Derived>& probs, double u) {
  double acc = 0.0;
  const int last = static_cast<int>(probs.size()) - 1;
  for (int h = 0; h < last; ++h) {
    acc += static_cast<double>(probs(h));
    if (u < acc) return h;
  }
  return last;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Draws one label from the softmax model. Consumes exactly one uniform variate.
template <class ThetaDerived, class XDerived>
int sample_outcome(const Eigen::MatrixBase<ThetaDerived>& theta,
                   const Eigen::MatrixBase<XDerived>& x, Rng& rng) {
  return label_from_uniform(softmax_probabilities(theta, x), uniform01(rng));
}

/// Option-agnostic context plus one option-specific context per option.
class ContextBundle {
 public:
  ContextBundle() = default;
  ContextBundle(Eigen::VectorXd shared, std::vector<Eigen::VectorXd> per_option)
      : shared_(std::move(shared)), per_option_(std::move(per_option)) {
    if (shared_.size() < 1) throw std::invalid_argument("ContextBundle: context dimension must be >= 1");
    if (per_option_.size() < 2) throw std::invalid_argument("ContextBundle: need at least two options");
    for (const auto& v : per_option_) {
      if (v.size() != shared_.size()) {
        throw std::invalid_argument("ContextBundle: per-option context length mismatch");
      }
    }
  }

  int options() const { return static_cast<int>(per_option_.size()); }
  Eigen::Index dim() const { return shared_.size(); }
  const Eigen::VectorXd& shared() const { return shared_; }
  const std::vector<Eigen::VectorXd>& per_option() const { return per_option_; }

  Eigen::VectorXd effective(int option) const {
    return shared_ + per_option_.at(static_cast<std::size_t>(option));
  }

 private:
  Eigen::VectorXd shared_;
  std::vector<Eigen::VectorXd> per_option_;
};

/// Ground truth of one bandit instance. `preferred_label` is 0-based.
struct EnvironmentTruth {
  int options = 0;
  int contexts = 0;
  int labels = 0;
  int preferred_label = 0;
  std::vector<ParameterMatrix<double>> theta_true;
  ContextBundle context;
  Eigen::VectorXd psi;

  double psi_star() const { return psi.maxCoeff(); }
  Eigen::Index parameter_count() const {
    return static_cast<Eigen::Index>(options) * contexts * labels;
  }
};

/// Success probabilities psi_k = p(o = f_p | Theta*_k, x_k).
inline Eigen::VectorXd success_probabilities(const std::vector<ParameterMatrix<double>>& theta,
                                             const ContextBundle& context, int preferred_label) {
  Eigen::VectorXd psi(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    psi(static_cast<Eigen::Index>(k)) =
        softmax_likelihood(theta[k], preferred_label, context.effective(static_cast<int>(k)));
  }
  return psi;
}

EnvironmentTruth make_environment(std::vector<ParameterMatrix<double>> theta_true,
                                  ContextBundle context, int preferred_label);

/// Theta* entries i.i.d. Uniform(0,1); context entries i.i.d. Bernoulli(1/2).
EnvironmentTruth generate_environment(int options, int contexts, int labels, int preferred_label,
                                      std::uint64_t seed);

}  // namespace oacmab
