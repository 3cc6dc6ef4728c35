#pragma once

// Reference computations for the tests. Nothing here calls into the library's
// numerics: softmax, sampling, quadrature and UCB1 are written out directly.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Big = boost::multiprecision::cpp_dec_float_50;

/// Eq. (1) in 50-digit arithmetic. theta is C x F, x has length C.
inline std::vector<double> softmax_hp(const Eigen::MatrixXd& theta, const Eigen::VectorXd& x) {
  std::vector<Big> e(static_cast<std::size_t>(theta.cols()));
  Big total = 0;
  for (Eigen::Index f = 0; f < theta.cols(); ++f) {
    Big logit = 0;
    for (Eigen::Index c = 0; c < theta.rows(); ++c) logit += Big(theta(c, f)) * Big(x(c));
    e[static_cast<std::size_t>(f)] = boost::multiprecision::exp(logit);
    total += e[static_cast<std::size_t>(f)];
  }
  std::vector<double> p;
  for (const auto& v : e) p.push_back(static_cast<double>(v / total));
  return p;
}

/// Plain long-double softmax of the flattened (column-major label blocks) parameter.
inline std::vector<long double> softmax_flat(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
  const auto c = x.size();
  const auto f = theta.size() / c;
  std::vector<long double> logits(static_cast<std::size_t>(f), 0.0L);
  long double top = -INFINITY;
  for (Eigen::Index j = 0; j < f; ++j) {
    for (Eigen::Index i = 0; i < c; ++i) logits[j] += static_cast<long double>(theta(j * c + i)) * x(i);
    top = std::max(top, logits[j]);
  }
  long double total = 0.0L;
  for (auto& l : logits) total += (l = std::exp(l - top));
  for (auto& l : logits) l /= total;
  return logits;
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline double normal_pdf(double t, double mean, double sd) {
  const double z = (t - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

/// One Gaussian over the logit difference delta = theta_1 - theta_2.
struct Normal1 {
  double weight;
  double mean;
  double sd;
};

/// Projection of a 2-D (C=1, F=2) Gaussian onto delta.
inline Normal1 project_delta(double weight, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
  const Eigen::Vector2d a(1.0, -1.0);
  return {weight, a.dot(mean), std::sqrt(a.dot(cov * a))};
}

/// Trapezoid rule over n points on [lo, hi].
template <class Fn>
double trapezoid(Fn fn, double lo, double hi, int n = 100000) {
  const double h = (hi - lo) / (n - 1);
  double sum = 0.5 * (fn(lo) + fn(hi));
  for (int i = 1; i < n - 1; ++i) sum += fn(lo + i * h);
  return sum * h;
}

struct Quadrature1D {
  double evidence;
  double post_mean;  // of delta
};

/// Evidence and posterior mean of delta for label 0 (sign +1) or label 1
/// (sign -1) of a two-label, one-context softmax.
inline Quadrature1D logistic_normal(double mean, double sd, int sign, double lo, double hi) {
  auto lik = [&](double t) { return sigmoid(sign * t) * normal_pdf(t, mean, sd); };
  const double z = trapezoid(lik, lo, hi);
  const double m = trapezoid([&](double t) { return t * lik(t); }, lo, hi) / z;
  return {z, m};
}

/// Normalized density on `grid` of prior(delta) * (fp/F + (1-fp) p(label|delta)),
/// the exact posterior under the fault model with F = 2.
inline std::vector<double> fault_posterior_density(const std::vector<Normal1>& prior, int sign, double fp,
                                                   const std::vector<double>& grid, double lo, double hi) {
  auto unnorm = [&](double t) {
    double p = 0.0;
    for (const auto& c : prior) p += c.weight * normal_pdf(t, c.mean, c.sd);
    return p * (fp / 2.0 + (1.0 - fp) * sigmoid(sign * t));
  };
  const double z = trapezoid(unnorm, lo, hi);
  std::vector<double> out;
  for (double t : grid) out.push_back(unnorm(t) / z);
  return out;
}

inline double mixture_density(const std::vector<Normal1>& mix, double t) {
  double p = 0.0;
  for (const auto& c : mix) p += c.weight * normal_pdf(t, c.mean, c.sd);
  return p;
}

/// Sampler for a weighted Gaussian mixture, independent of the library.
class MixtureSampler {
 public:
  MixtureSampler(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                 std::vector<Eigen::MatrixXd> covs)
      : pick_(weights.begin(), weights.end()), means_(std::move(means)) {
    for (const auto& s : covs) chol_.push_back(Eigen::MatrixXd(s.llt().matrixL()));
  }

  template <class Gen>
  Eigen::VectorXd operator()(Gen& gen) {
    const auto u = static_cast<std::size_t>(pick_(gen));
    Eigen::VectorXd z(means_[u].size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(gen);
    return means_[u] + chol_[u] * z;
  }

 private:
  std::discrete_distribution<int> pick_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> chol_;
};

struct McEstimate {
  double mean;
  double se;
};

/// E[p(label | theta, x)] under `sampler` by plain Monte Carlo.
template <class Sampler>
McEstimate mc_evidence(Sampler& sampler, int label, const Eigen::VectorXd& x, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  double s = 0.0;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = static_cast<double>(softmax_flat(sampler(gen), x)[static_cast<std::size_t>(label)]);
    s += p;
    ss += p * p;
  }
  const double mean = s / n;
  return {mean, std::sqrt((ss / n - mean * mean) / (n - 1))};
}

struct McEfe {
  double total;
  std::vector<double> q;
};

/// Brute-force expected free energy of one option:
/// sum_o q(o) log(q(o)/p_ev(o)) - E[p(o|theta) log p(o|theta)], with
/// q(o) = E[p(o|theta)] and theta drawn from the belief.
template <class Sampler>
McEfe mc_efe(Sampler& sampler, const Eigen::VectorXd& x, const std::vector<double>& p_ev, int n,
             std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::size_t f = p_ev.size();
  std::vector<long double> q(f, 0.0L);
  std::vector<long double> plogp(f, 0.0L);
  for (int i = 0; i < n; ++i) {
    const auto p = softmax_flat(sampler(gen), x);
    for (std::size_t o = 0; o < f; ++o) {
      q[o] += p[o];
      if (p[o] > 0.0L) plogp[o] += p[o] * std::log(p[o]);
    }
  }
  McEfe out{0.0, {}};
  for (std::size_t o = 0; o < f; ++o) {
    const double qo = static_cast<double>(q[o] / n);
    out.q.push_back(qo);
    out.total += qo * std::log(qo / p_ev[o]) - static_cast<double>(plogp[o] / n);
  }
  return out;
}

/// UCB1 written from the textbook description, for comparison with ucb_select.
class Ucb1 {
 public:
  explicit Ucb1(int arms) : n_(static_cast<std::size_t>(arms), 0), s_(static_cast<std::size_t>(arms), 0.0) {}

  int choose() const {
    for (std::size_t i = 0; i < n_.size(); ++i) {
      if (n_[i] == 0) return static_cast<int>(i);
    }
    int best = 0;
    double best_v = -INFINITY;
    for (std::size_t i = 0; i < n_.size(); ++i) {
      const double v = s_[i] / n_[i] + std::sqrt(2.0 * std::log(static_cast<double>(t_)) / n_[i]);
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  void update(int arm, double reward) {
    ++t_;
    ++n_[static_cast<std::size_t>(arm)];
    s_[static_cast<std::size_t>(arm)] += reward;
  }

 private:
  int t_ = 0;
  std::vector<int> n_;
  std::vector<double> s_;
};

}  // namespace oracle
