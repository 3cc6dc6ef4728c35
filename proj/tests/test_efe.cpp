#include "oacmab/efe.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace oacmab;

namespace {

Belief random_belief(int m, Eigen::Index d, std::mt19937_64& gen, double spread = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<Gaussian> comps;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd mean(d);
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index j = 0; j < d; ++j) mean(j) = spread * n(gen);
    for (Eigen::Index j = 0; j < a.size(); ++j) a.data()[j] = n(gen);
    comps.emplace_back(mean, 0.5 * a * a.transpose() / double(d) + 0.3 * Eigen::MatrixXd::Identity(d, d),
                       std::log(u(gen)));
  }
  return Belief(0, std::move(comps));
}

oracle::MixtureSampler sampler_for(const Belief& b) {
  std::vector<double> w;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> cov;
  for (const auto& c : b.components()) {
    w.push_back(c.weight());
    mu.push_back(c.mean());
    cov.push_back(c.cov());
  }
  return oracle::MixtureSampler(w, mu, cov);
}

std::vector<double> as_vector(const EvolutionaryPrior& ev) {
  return std::vector<double>(ev.probs().data(), ev.probs().data() + ev.labels());
}

}  // namespace

TEST_CASE("evolutionary prior") {
  const auto ev = EvolutionaryPrior::preferring(4, 2);
  CHECK(ev(2) == 1.0);
  CHECK(ev(0) == 0.01);
  CHECK(ev.labels() == 4);
  CHECK_THROWS_AS(EvolutionaryPrior(Eigen::Vector3d(1.0, 0.0, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(EvolutionaryPrior::preferring(4, 4), std::out_of_range);
}

TEST_CASE("predictive probability with zero context is uniform") {
  std::mt19937_64 gen(1);
  const Belief b = random_belief(3, 12, gen);
  for (int o = 0; o < 4; ++o) {
    CHECK(predictive_prob(b, o, Eigen::VectorXd::Zero(3)).q == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("predictive probability matches quadrature to 1e-3" * doctest::may_fail()) {
  // Same Laplace evidence gap as the laplace module; measured and reported.
  const Gaussian g(Eigen::Vector2d(0.0, 0.0), 0.5 * Eigen::Matrix2d::Identity());
  const Belief b(0, {g});
  for (int o = 0; o < 2; ++o) {
    const double q = predictive_prob(b, o, Eigen::VectorXd::Ones(1)).q;
    const double ref = oracle::logistic_normal(0.0, 1.0, o == 0 ? 1 : -1, -12.0, 12.0).evidence;
    MESSAGE("outcome " << o << ": q " << q << ", quadrature " << ref);
    CHECK(std::abs(q - ref) <= 1e-3);
  }
}

TEST_CASE("predictive probabilities sum to one within 1e-6" * doctest::may_fail()) {
  std::mt19937_64 gen(2);
  const Belief b = random_belief(2, 12, gen);
  const Eigen::Vector3d x(1.0, 1.0, 0.0);
  double total = 0.0;
  for (int o = 0; o < 4; ++o) total += predictive_prob(b, o, x).q;
  MESSAGE("sum of q " << total);
  CHECK(std::abs(total - 1.0) <= 1e-6);
}

TEST_CASE("likelihood exponential form") {
  SUBCASE("flat likelihood") {
    std::mt19937_64 gen(3);
    const auto nat = to_natural(random_belief(1, 4, gen)[0]);
    const auto form = likelihood_exp_form(nat, nat, -std::log(4.0));
    CHECK(form.h_lin.cwiseAbs().maxCoeff() == 0.0);
    CHECK(form.k_quad.cwiseAbs().maxCoeff() == 0.0);
    CHECK(form.g_const == doctest::Approx(std::log(0.25)).epsilon(1e-14));
  }
  SUBCASE("conjugate Gaussian pseudo-likelihood is recovered") {
    const Gaussian prior(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
    // exp(-1/2 (t-1)^2) times N(0,1) normalizes to N(1/2, 1/2) with
    // evidence exp(-1/4)/sqrt(2).
    const Gaussian post(Eigen::VectorXd::Constant(1, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.5));
    const auto form = likelihood_exp_form(to_natural(prior), to_natural(post), -0.25 - 0.5 * std::log(2.0));
    CHECK(form.g_const == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(form.h_lin(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(form.k_quad(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("exponential form tracks the softmax near the mode") {
  const Gaussian prior(Eigen::VectorXd::Constant(4, 0.5), Eigen::MatrixXd::Identity(4, 4));
  const Eigen::Vector2d x(1.0, 1.0);
  const auto fit = laplace_update(prior, 0, x);
  const auto form = likelihood_exp_form(to_natural(prior), fit.natural(), fit.log_evidence);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double s = -2.0 + 4.0 * i / 99.0;
    Eigen::VectorXd theta = fit.post_mean;
    theta(0) += s;
    const double exact = static_cast<double>(oracle::softmax_flat(theta, x)[0]);
    worst = std::max(worst, std::abs(std::exp(form.log_value(theta)) - exact) / exact);
  }
  MESSAGE("max relative error on the grid " << worst);
  Eigen::VectorXd at_mode = fit.post_mean;
  CHECK(std::exp(form.log_value(at_mode)) ==
        doctest::Approx(static_cast<double>(oracle::softmax_flat(at_mode, x)[0])).epsilon(1e-9));
}

TEST_CASE("expected quadratic") {
  LikelihoodExpForm<double> form{0.0, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  CHECK(expected_quadratic<double>(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), form) == -1.0);

  LikelihoodExpForm<double> linear{0.7, Eigen::Vector2d(1.0, -2.0), Eigen::MatrixXd::Zero(2, 2)};
  const Eigen::Vector2d mu(0.3, 0.4);
  CHECK(expected_quadratic<double>(mu, 3.0 * Eigen::MatrixXd::Identity(2, 2), linear) ==
        doctest::Approx(0.7 + 0.3 - 0.8));

  std::mt19937_64 gen(4);
  const Gaussian g = random_belief(1, 3, gen)[0];
  Eigen::Matrix3d k;
  k << 1.0, 0.2, -0.1, 0.2, 0.5, 0.0, -0.1, 0.0, 0.8;
  const LikelihoodExpForm<double> rnd{-0.3, Eigen::Vector3d(0.5, -1.0, 0.25), k};
  auto draw = sampler_for(Belief(0, {g}));
  std::mt19937_64 sgen(5);
  const int n = 1000000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd t = draw(sgen);
    const double v = rnd.log_value(t);
    s += v;
    ss += v * v;
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / (n - 1));
  CHECK(std::abs(expected_quadratic(g, rnd) - mean) < 3.0 * se);
}

TEST_CASE("no risk when the preference equals the predictive") {
  std::mt19937_64 gen(6);
  const Belief b = random_belief(2, 6, gen);
  const Eigen::Vector2d x(1.0, 0.0);
  Eigen::VectorXd q(3);
  for (int o = 0; o < 3; ++o) q(o) = predictive_prob(b, o, x).q;
  const EfeScore s = efe(b, x, EvolutionaryPrior(q));
  double ambiguity = 0.0;
  for (const auto& o : s.per_outcome) {
    CHECK(std::abs(o.term1) < 1e-15);
    ambiguity += o.term2;
  }
  CHECK(s.total == doctest::Approx(-ambiguity).epsilon(1e-14));
}

TEST_CASE("zero context gives the closed form") {
  std::mt19937_64 gen(7);
  const Belief b = random_belief(3, 8, gen);
  const EvolutionaryPrior ev(Eigen::Vector4d(1.0, 0.01, 0.3, 0.05));
  const EfeScore s = efe(b, Eigen::VectorXd::Zero(2), ev);
  double expected = 0.0;
  for (int o = 0; o < 4; ++o) expected -= std::log(ev(o)) / 4.0;
  CHECK(s.total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("risk terms equal the sum computed from q") {
  std::mt19937_64 gen(8);
  const Belief b = random_belief(3, 12, gen);
  const Eigen::Vector3d x(1.0, 1.0, 1.0);
  const auto ev = EvolutionaryPrior::preferring(4, 0);
  const EfeScore s = efe(b, x, ev);
  double from_q = 0.0, risk = 0.0;
  for (int o = 0; o < 4; ++o) {
    const double q = s.per_outcome[o].q;
    from_q += q * std::log(q / ev(o));
    risk += s.per_outcome[o].term1;
    CHECK(q == doctest::Approx(predictive_prob(b, o, x).q).epsilon(1e-15));
  }
  CHECK(std::abs(risk - from_q) <= 1e-10);
}

TEST_CASE("duplicated mixands leave the score unchanged") {
  std::mt19937_64 gen(9);
  const Gaussian g = random_belief(1, 6, gen)[0];
  const Eigen::Vector2d x(1.0, 1.0);
  const auto ev = EvolutionaryPrior::preferring(3, 1);
  const EfeScore one = efe(Belief(0, {g}), x, ev);
  const EfeScore two = efe(Belief(0, {g, g}), x, ev);
  CHECK(two.total == doctest::Approx(one.total).epsilon(1e-12));
  for (int o = 0; o < 3; ++o) CHECK(two.per_outcome[o].term2 == doctest::Approx(one.per_outcome[o].term2).epsilon(1e-12));
}

TEST_CASE("EFE agrees with brute-force Monte Carlo") {
  std::mt19937_64 gen(10);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  const auto ev = EvolutionaryPrior::preferring(2, 0);
  for (int rep = 0; rep < 4; ++rep) {
    const Belief b = random_belief(1 + rep % 2, 2, gen);
    auto draw = sampler_for(b);
    const auto mc = oracle::mc_efe(draw, x, as_vector(ev), 1000000, 20 + rep);
    const EfeScore s = efe(b, x, ev);
    MESSAGE("analytic " << s.total << ", sampled " << mc.total);
    CHECK(std::abs(s.total - mc.total) <= 0.05 * std::abs(mc.total));
  }
}

TEST_CASE("rescaling the preference keeps the argmin") {
  std::mt19937_64 gen(11);
  const Eigen::Vector3d x(1.0, 0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Belief> beliefs;
    for (int k = 0; k < 3; ++k) beliefs.push_back(random_belief(1 + rep % 2, 12, gen));
    const auto ev = EvolutionaryPrior::preferring(4, rep % 4);
    const EvolutionaryPrior scaled(ev.probs() * 7.5);
    auto argmin = [&](const EvolutionaryPrior& p) {
      int best = 0;
      double best_v = INFINITY;
      for (int k = 0; k < 3; ++k) {
        const double v = efe(beliefs[k], x, p).total;
        if (v < best_v) {
          best_v = v;
          best = k;
        }
      }
      return best;
    };
    CHECK(argmin(ev) == argmin(scaled));
  }
}

TEST_CASE("dimension mismatch is rejected") {
  std::mt19937_64 gen(12);
  const Belief b = random_belief(1, 6, gen);
  CHECK_THROWS_AS(efe(b, Eigen::Vector2d(1, 1), EvolutionaryPrior::preferring(4, 0)), std::invalid_argument);
}
