#include "oacmab/inference.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace oacmab;

namespace {

const Eigen::VectorXd kOne = Eigen::VectorXd::Ones(1);

Gaussian logit_component(double delta_mean, double weight) {
  return Gaussian(Eigen::Vector2d(delta_mean / 2.0, -delta_mean / 2.0), 0.5 * Eigen::Matrix2d::Identity(),
                  std::log(weight));
}

Belief random_belief(int m, Eigen::Index d, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<Gaussian> comps;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd mean(d);
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index j = 0; j < d; ++j) mean(j) = n(gen);
    for (Eigen::Index j = 0; j < a.size(); ++j) a.data()[j] = n(gen);
    comps.emplace_back(mean, a * a.transpose() / double(d) + 0.5 * Eigen::MatrixXd::Identity(d, d),
                       std::log(u(gen)));
  }
  return Belief(2, std::move(comps));
}

std::vector<oracle::Normal1> delta_marginals(const Belief& b) {
  std::vector<oracle::Normal1> out;
  for (const auto& c : b.components()) out.push_back(oracle::project_delta(c.weight(), c.mean(), c.cov()));
  return out;
}

// sup |p - ref| / sup ref over the grid.
double relative_sup_error(const Belief& b, const std::vector<double>& ref, const std::vector<double>& grid) {
  const auto mix = delta_marginals(b);
  double err = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    err = std::max(err, std::abs(oracle::mixture_density(mix, grid[i]) - ref[i]));
    peak = std::max(peak, ref[i]);
  }
  return err / peak;
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

void check_same(const Belief& a, const Belief& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t u = 0; u < a.size(); ++u) {
    CHECK(std::abs(a[u].weight() - b[u].weight()) <= tol);
    CHECK((a[u].mean() - b[u].mean()).cwiseAbs().maxCoeff() <= tol);
    CHECK((a[u].cov() - b[u].cov()).cwiseAbs().maxCoeff() <= tol);
  }
}

}  // namespace

TEST_CASE("association probabilities") {
  for (double lambda : {0.01, 0.25, 0.5, 0.9}) {
    const auto none = association_probabilities(lambda, {0.0, 4});
    CHECK(none.gamma0 == 0.0);
    CHECK(none.gamma1 == 1.0);
    const auto all = association_probabilities(lambda, {1.0, 4});
    CHECK(all.gamma0 == 1.0);
    CHECK(all.gamma1 == 0.0);
  }
  for (int f : {2, 4, 12}) {
    for (double fp : {0.1, 0.4, 0.75}) {
      const auto g = association_probabilities(1.0 / f, {fp, f});
      CHECK(g.gamma0 == doctest::Approx(fp).epsilon(1e-14));
      CHECK(g.gamma1 == doctest::Approx(1.0 - fp).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(association_probabilities(0.0, {0.4, 4}), std::invalid_argument);
  CHECK_THROWS_AS(association_probabilities(0.5, {1.4, 4}), std::invalid_argument);
}

TEST_CASE("gamma1 grows with the evidence") {
  for (double fp : {0.05, 0.4, 0.9}) {
    double last = -1.0;
    for (double lambda = 1e-4; lambda <= 1.0; lambda *= 1.3) {
      const double g1 = association_probabilities(lambda, {fp, 4}).gamma1;
      CHECK(g1 >= last);
      last = g1;
    }
  }
}

TEST_CASE("naive update with zero context only reweights identically") {
  std::mt19937_64 gen(3);
  const Belief b = random_belief(3, 8, gen);
  const auto upd = naive_update(b, 1, Eigen::VectorXd::Zero(2));
  check_same(upd.posterior, b, 1e-12);
  CHECK(upd.lambda == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("naive update of one mixand is the Laplace posterior") {
  const Gaussian g = logit_component(0.3, 1.0);
  const auto upd = naive_update(Belief(0, {g}), 0, kOne);
  const auto lap = laplace_update(g, 0, kOne);
  REQUIRE(upd.posterior.size() == 1);
  CHECK(upd.posterior[0].weight() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(upd.posterior[0].mean() == lap.post_mean);
  CHECK((upd.posterior[0].cov() - lap.post_cov).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(upd.lambda == doctest::Approx(std::exp(lap.log_evidence)).epsilon(1e-14));
}

TEST_CASE("naive posterior density matches quadrature for two mixands") {
  const Belief b(0, {logit_component(-1.0, 0.6), logit_component(1.5, 0.4)});
  const auto upd = naive_update(b, 0, kOne);
  const auto g = grid(-7.0, 7.0, 1401);
  const auto ref = oracle::fault_posterior_density(delta_marginals(b), +1, 0.0, g, -15.0, 15.0);
  const double err = relative_sup_error(upd.posterior, ref, g);
  MESSAGE("relative sup-norm error " << err);
  CHECK(err <= 0.02);
}

TEST_CASE("PSDA with no faults equals the naive update") {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Belief b = random_belief(1 + rep % 4, 6, gen);
    const Eigen::Vector2d x(1.0, rep % 2);
    const auto naive = naive_update(b, rep % 3, x);
    const auto psda = psda_update(b, rep % 3, x, {0.0, 3, 100});
    CHECK(psda.association.gamma1 == 1.0);
    check_same(psda.belief, naive.posterior, 1e-9);
  }
}

TEST_CASE("PSDA with certain faults returns the prior") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Belief b = random_belief(1 + rep % 4, 6, gen);
    const auto psda = psda_update(b, rep % 3, Eigen::Vector2d(1.0, 1.0), {1.0, 3, 100});
    CHECK(psda.association.gamma0 == 1.0);
    check_same(psda.belief, b, 1e-9);
  }
}

TEST_CASE("PSDA density matches the fault-model posterior") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto g = grid(-7.0, 7.0, 1401);
  for (int rep = 0; rep < 5; ++rep) {
    const double m = u(gen);
    const int label = rep % 2;
    const Belief b(0, {logit_component(m, 1.0)});
    const auto psda = psda_update(b, label, kOne, {0.4, 2, 10});
    const auto ref = oracle::fault_posterior_density(delta_marginals(b), label == 0 ? 1 : -1, 0.4, g, -15.0, 15.0);
    const double err = relative_sup_error(psda.belief, ref, g);
    MESSAGE("prior delta mean " << m << ", label " << label << ": error " << err);
    CHECK(err <= 0.02);
  }
}

TEST_CASE("PSDA component bookkeeping") {
  std::mt19937_64 gen(7);
  for (int m : {1, 3, 5, 8, 10}) {
    const Belief b = random_belief(m, 6, gen);
    const auto psda = psda_update(b, 0, Eigen::Vector2d(1.0, 0.0), {0.3, 3, 10});
    CHECK(psda.components_before == static_cast<std::size_t>(2 * m));
    CHECK(psda.belief.size() <= 10);
    CHECK(psda.components_after == psda.belief.size());
    CHECK(std::abs(psda.belief.weights().sum() - 1.0) < 1e-9);
    CHECK(psda.belief.option() == b.option());
  }
}

TEST_CASE("PSDA mean is the gamma-weighted blend of prior and naive means") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> fp(0.05, 0.95);
  for (int rep = 0; rep < 30; ++rep) {
    const Belief b = random_belief(1 + rep % 5, 9, gen);
    const Eigen::Vector3d x(1.0, 0.0, 1.0);
    const FusionConfig cfg{fp(gen), 3, 100};
    const auto naive = naive_update(b, rep % 3, x);
    const auto psda = psda_update(b, rep % 3, x, cfg);
    const Eigen::VectorXd blend =
        psda.association.gamma0 * mixture_mean(b) + psda.association.gamma1 * mixture_mean(naive.posterior);
    CHECK((mixture_mean(psda.belief) - blend).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("fusion argument validation") {
  const Belief b(0, {logit_component(0.0, 1.0)});
  CHECK_THROWS_AS(psda_update(b, 0, kOne, {-0.1, 2, 10}), std::invalid_argument);
  CHECK_THROWS_AS(psda_update(b, 0, kOne, {0.1, 2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(naive_update(b, 2, kOne), std::out_of_range);
}
