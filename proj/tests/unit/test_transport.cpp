#include <doctest.h>

#include <cmath>
#include <limits>

#include "spirit/error.hpp"
#include "spirit/oracles.hpp"
#include "spirit/transport.hpp"

using namespace spirit;

namespace {

DiscreteMeasure line(std::initializer_list<double> xs) {
  RowMatrix p(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  return DiscreteMeasure::uniform(p);
}

DiscreteMeasure random_cloud(Rng& rng, std::size_t n, bool uniform) {
  RowMatrix p(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = rng.normal();
  DiscreteMeasure m = DiscreteMeasure::uniform(p);
  if (!uniform) {
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights(i) = 0.2 + rng.uniform();
    m.weights /= m.weights.sum();
  }
  return m;
}

}  // namespace

TEST_CASE("exact W2 small cases") {
  const DiscreteMeasure mu = line({0.0, 1.0, 5.0});
  CHECK(w2_exact(mu, mu).value == 0.0);
  CHECK(w2_exact(line({0.0}), line({3.0})).value == doctest::Approx(9.0));
  // Both matchings of {0,1} onto {2,3}: (4 + 4)/2 = 4 and (9 + 1)/2 = 5.
  CHECK(w2_exact(line({0.0, 1.0}), line({2.0, 3.0})).value == doctest::Approx(4.0));
}

TEST_CASE("exact W2 with unequal weights uses the transportation simplex") {
  DiscreteMeasure mu = line({0.0, 1.0});
  const DiscreteMeasure nu = line({2.0});
  CHECK(w2_exact(mu, nu).value == doctest::Approx(0.5 * 4 + 0.5 * 1));
  mu.weights << 0.25, 0.75;
  const TransportResult r = w2_exact(mu, line({0.0, 1.0}));
  // 0.25 stays at 0, 0.5 stays at 1, 0.25 moves from 1 to 0.
  CHECK(r.value == doctest::Approx(0.25));
  CHECK((r.plan.plan.rowwise().sum() - mu.weights).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("assignment and transportation simplex agree with brute force") {
  Rng rng(1);
  for (int rep = 0; rep < 30; ++rep) {
    const auto n = 1 + static_cast<std::size_t>(rep % 7);
    const DiscreteMeasure a = random_cloud(rng, n, true), b = random_cloud(rng, n, true);
    const double brute = oracle::w2_bruteforce(a, b);
    CHECK(w2_exact(a, b).value == doctest::Approx(brute).epsilon(1e-12));
    const Eigen::MatrixXd cost = squared_euclidean_cost(a.points, b.points);
    const TransportPlan simplex = solve_transportation(cost, a.weights, b.weights);
    CHECK(simplex.cost_term == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("assignment on a hand instance") {
  Eigen::MatrixXd c(3, 3);
  c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto a = solve_assignment(c);
  CHECK(c(0, static_cast<Eigen::Index>(a[0])) + c(1, static_cast<Eigen::Index>(a[1])) + c(2, static_cast<Eigen::Index>(a[2])) == 5.0);
}

TEST_CASE("sinkhorn approaches exact W2") {
  Rng rng(2);
  const DiscreteMeasure a = random_cloud(rng, 6, false), b = random_cloud(rng, 5, false);
  const double exact = w2_exact(a, b).value;
  const double smooth = w2_sinkhorn(a, b, 1e-3).value;
  CHECK(smooth >= exact - 1e-9);
  CHECK(smooth - exact < 0.02);
}

TEST_CASE("exact solver enforces its size limit") {
  Rng rng(3);
  const DiscreteMeasure a = random_cloud(rng, 70, true), b = random_cloud(rng, 70, true);
  try {
    w2_exact(a, b);
    FAIL("expected size_error");
  } catch (const InputError& e) {
    CHECK(e.code() == "size_error");
  }
}

TEST_CASE("kl divergence conventions") {
  Eigen::VectorXd p(2), q(2);
  p << 0.0, 1.0;
  q << 0.5, 0.5;
  CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)));
  CHECK(kl_divergence(q, p) == std::numeric_limits<double>::infinity());
}

TEST_CASE("spt of a measure with itself is near zero") {
  Rng rng(4);
  const SptSolverConfig cfg;
  for (std::size_t n : {1, 2, 4, 8}) {
    const DiscreteMeasure mu = random_cloud(rng, n, n % 2 == 0);
    CHECK(spt(mu, mu, cfg).value <= 2.0 * cfg.epsilon * std::log(double(n)) + 1e-12);
  }
}

TEST_CASE("spt never exceeds W2 on random instances") {
  Rng rng(5);
  const SptSolverConfig cfg;
  for (int rep = 0; rep < 60; ++rep) {
    const auto n = 1 + static_cast<std::size_t>(rng() % 8), m = 1 + static_cast<std::size_t>(rng() % 8);
    const DiscreteMeasure mu = random_cloud(rng, n, rep % 2), nu = random_cloud(rng, m, rep % 3);
    const TransportResult s = spt(mu, nu, cfg);
    CHECK(s.value <= w2_exact(mu, nu).value + cfg.epsilon * std::log(double(n * m) + 1.0));
    CHECK((s.plan.plan.rowwise().sum() - mu.weights).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("spt ignores a far outlier at the cost of log(1/0.9)") {
  const DiscreteMeasure mu = line({0.0});
  DiscreteMeasure nu = line({0.0, 100.0});
  nu.weights << 0.9, 0.1;
  const TransportResult r = spt(mu, nu);
  CHECK(r.value <= 0.105 + 1e-3);
  CHECK(r.value == doctest::Approx(std::log(1.0 / 0.9)).epsilon(1e-3));
  CHECK(r.plan.plan(0, 1) < 1e-6);
}

TEST_CASE("contamination bound on a point mass") {
  const double c = contamination_constant(0.1);
  CHECK(c == doctest::Approx(0.9 * std::log(1.0 / 0.9) + 0.1 * std::log(10.0)));
  const DiscreteMeasure mu = line({0.0});
  ContaminationSpec spec;
  spec.zeta = 0.1;
  spec.z = Eigen::VectorXd::Ones(1);
  const auto rows = robustness_bench(mu, mu, spec, {3.0, 10.0, 100.0});
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].bound == doctest::Approx(0.42506).epsilon(1e-4));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].spt <= rows[k].bound);
    CHECK(rows[k].w2 == doctest::Approx(0.1 * rows[k].radius * rows[k].radius));
    if (k > 0) CHECK(rows[k].w2 > rows[k - 1].w2);
  }
}

TEST_CASE("vanishing contamination recovers the clean discrepancy") {
  Rng rng(6);
  const DiscreteMeasure mu = random_cloud(rng, 4, true), nu = random_cloud(rng, 3, false);
  Eigen::VectorXd z(2);
  z << 40.0, 0.0;
  const double clean = spt(mu, nu).value;
  const double dirty = spt(mu, contaminate(nu, 1e-7, z)).value;
  CHECK(std::abs(dirty - clean) < 1e-5);
}

TEST_CASE("toy matching: SPT skips the outlier cluster, OT cannot") {
  const ToyMatching toy = toy_matching_figure(0);
  CHECK(toy.ot_outlier_mass == doctest::Approx(toy.outlier_target_weight).epsilon(0.1));
  CHECK(toy.spt_outlier_mass < 0.2 * toy.outlier_target_weight);
  CHECK((toy.ot.plan.plan.rowwise().sum() - toy.source.weights).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((toy.spt.plan.plan.rowwise().sum() - toy.source.weights).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(toy.spt_cross_mode_mass <= toy.ot_cross_mode_mass + 1e-9);
}

TEST_CASE("invalid measures and configs are rejected") {
  DiscreteMeasure bad = line({0.0, 1.0});
  bad.weights << 0.7, 0.7;
  CHECK_THROWS_AS(bad.validate(), InputError);
  SptSolverConfig cfg;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  CHECK_THROWS_AS(contaminate(line({0.0}), 1.5, Eigen::VectorXd::Ones(1)), InputError);
}
