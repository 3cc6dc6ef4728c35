#pragma once

#include "oacmab/gaussmix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace oacmab {

struct LaplaceOptions {
  int max_iterations = 100;
  int max_halvings = 30;
  double gradient_tolerance = 1e-8;
};

/// Gaussian approximation of prior(Theta) * softmax(label | Theta, x) and the
/// log of its normalization constant C_u.
template <class Scalar>
struct LaplaceResult {
  Vector<Scalar> post_mean;
  Matrix<Scalar> post_cov;
  Matrix<Scalar> post_precision;
  Scalar log_det_precision = Scalar(0);
  Scalar log_evidence = Scalar(0);
  int iterations = 0;
  bool converged = false;

  GaussianComponent<Scalar> posterior(Scalar log_weight = Scalar(0)) const {
    return GaussianComponent<Scalar>(post_mean, post_cov, log_weight);
  }
  NaturalParams<Scalar> natural() const {
    return natural_from_precision<Scalar>(post_mean, post_precision, log_det_precision);
  }
};

namespace detail {

// Log-likelihood pieces of one label under the flattened parameter vector.
template <class Scalar>
struct SoftmaxPoint {
  Vector<Scalar> probs;
  Scalar log_lik;
};

template <class Scalar>
SoftmaxPoint<Scalar> softmax_point(const Vector<Scalar>& theta, int label, const Vector<Scalar>& x) {
  const Eigen::Index c = x.size();
  const Eigen::Index f = theta.size() / c;
  const Vector<Scalar> logits =
      Eigen::Map<const Matrix<Scalar>>(theta.data(), c, f).transpose() * x;
  const Scalar lse = log_sum_exp(logits);
  return {(logits.array() - lse).exp().matrix(), logits(label) - lse};
}

// Hessian of the negative log-likelihood, (diag(p) - p p^T) kron x x^T.
template <class Scalar>
Matrix<Scalar> softmax_neg_hessian(const Vector<Scalar>& probs, const Vector<Scalar>& x) {
  const Eigen::Index c = x.size();
  const Eigen::Index f = probs.size();
  const Matrix<Scalar> xx = x * x.transpose();
  Matrix<Scalar> h(c * f, c * f);
  for (Eigen::Index a = 0; a < f; ++a) {
    for (Eigen::Index b = 0; b < f; ++b) {
      const Scalar w = (a == b ? probs(a) : Scalar(0)) - probs(a) * probs(b);
      h.block(a * c, b * c, c, c) = w * xx;
    }
  }
  return h;
}

}  // namespace detail

/// Newton iterations with halving line search on
/// g(Theta) = log softmax(label | Theta, x) + log N(Theta; prior), started at
/// the prior mean. Evidence is g(mode) + d/2 log 2pi - 1/2 log det A.
template <class Scalar, class XDerived>
LaplaceResult<Scalar> laplace_update(const GaussianComponent<Scalar>& prior, int label,
                                     const Eigen::MatrixBase<XDerived>& x_in,
                                     const LaplaceOptions& opts = {}) {
  using std::abs;
  using std::log;
  const Vector<Scalar> x = x_in.template cast<Scalar>();
  const Eigen::Index d = prior.dim();
  const Eigen::Index c = x.size();
  if (c < 1 || d % c != 0) {
    throw std::invalid_argument("laplace_update: parameter dimension " + std::to_string(d) +
                                " is not a multiple of context length " + std::to_string(c));
  }
  const Eigen::Index labels = d / c;
  if (label < 0 || label >= labels) {
    throw std::out_of_range("laplace_update: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(labels) + ")");
  }

  LaplaceResult<Scalar> out;
  if (x.isZero(0)) {
    // Constant likelihood 1/F: the posterior is the prior.
    out.post_mean = prior.mean();
    out.post_cov = prior.cov();
    out.post_precision = prior.precision();
    out.log_det_precision = -prior.log_det_cov();
    out.log_evidence = -log(static_cast<Scalar>(labels));
    out.converged = true;
    return out;
  }

  const Matrix<Scalar>& prior_prec = prior.precision();
  const Scalar prior_norm =
      -Scalar(0.5) * (static_cast<Scalar>(d) * log_two_pi<Scalar>() + prior.log_det_cov());
  auto objective = [&](const Vector<Scalar>& theta, detail::SoftmaxPoint<Scalar>& pt) {
    pt = detail::softmax_point(theta, label, x);
    const Vector<Scalar> r = theta - prior.mean();
    return pt.log_lik - Scalar(0.5) * r.dot(prior_prec * r) + prior_norm;
  };
  auto gradient = [&](const Vector<Scalar>& theta, const detail::SoftmaxPoint<Scalar>& pt) {
    Vector<Scalar> g = -(prior_prec * (theta - prior.mean()));
    for (Eigen::Index h = 0; h < labels; ++h) {
      const Scalar coef = (h == label ? Scalar(1) : Scalar(0)) - pt.probs(h);
      g.segment(h * c, c) += coef * x;
    }
    return g;
  };

  Vector<Scalar> theta = prior.mean();
  detail::SoftmaxPoint<Scalar> pt;
  Scalar value = objective(theta, pt);
  Vector<Scalar> grad = gradient(theta, pt);
  Eigen::LLT<Matrix<Scalar>> llt;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iterations; ++it) {
    if (grad.template lpNorm<Eigen::Infinity>() <= static_cast<Scalar>(opts.gradient_tolerance)) {
      converged = true;
      break;
    }
    llt.compute(prior_prec + detail::softmax_neg_hessian(pt.probs, x));
    if (llt.info() != Eigen::Success) {
      throw NumericError("laplace_update: Newton system is not positive definite");
    }
    const Vector<Scalar> step = llt.solve(grad);
    Scalar t(1);
    bool accepted = false;
    detail::SoftmaxPoint<Scalar> cand_pt;
    for (int h = 0; h <= opts.max_halvings; ++h, t /= Scalar(2)) {
      const Vector<Scalar> cand = theta + t * step;
      const Scalar cand_value = objective(cand, cand_pt);
      if (cand_value >= value) {
        theta = cand;
        value = cand_value;
        pt = cand_pt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    grad = gradient(theta, pt);
  }
  if (!converged) {
    converged =
        grad.template lpNorm<Eigen::Infinity>() <= static_cast<Scalar>(opts.gradient_tolerance);
  }

  const Matrix<Scalar> a = prior_prec + detail::softmax_neg_hessian(pt.probs, x);
  llt.compute(a);
  if (llt.info() != Eigen::Success) {
    throw NumericError("laplace_update: posterior precision is not positive definite");
  }
  out.post_mean = theta;
  out.post_precision = (a + a.transpose()) / Scalar(2);
  out.post_cov = llt.solve(Matrix<Scalar>::Identity(d, d));
  out.post_cov = (out.post_cov + out.post_cov.transpose()).eval() / Scalar(2);
  out.log_det_precision = log_det_from_llt(llt);
  out.log_evidence = value + Scalar(0.5) * static_cast<Scalar>(d) * log_two_pi<Scalar>() -
                     Scalar(0.5) * out.log_det_precision;
  out.iterations = it;
  out.converged = converged;
  return out;
}

/// laplace_update applied to every mixand, order preserved.
template <class Scalar, class XDerived>
std::vector<LaplaceResult<Scalar>> batch_laplace(const ParameterBelief<Scalar>& belief, int label,
                                                 const Eigen::MatrixBase<XDerived>& x,
                                                 const LaplaceOptions& opts = {}) {
  std::vector<LaplaceResult<Scalar>> results;
  results.reserve(belief.size());
  for (std::size_t u = 0; u < belief.size(); ++u) {
    try {
      results.push_back(laplace_update(belief[u], label, x, opts));
    } catch (const NumericError& e) {
      throw NumericError("mixand " + std::to_string(u) + ": " + e.what());
    } catch (const std::out_of_range& e) {
      throw std::out_of_range("mixand " + std::to_string(u) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("mixand " + std::to_string(u) + ": " + e.what());
    }
  }
  return results;
}

}  // namespace oacmab
