#include "spirit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "spirit/error.hpp"

namespace spirit::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective(const Eigen::MatrixXd& cost, const Eigen::MatrixXd& plan, const Eigen::VectorXd& b, double lambda) {
  return spt_objective(cost, plan, b, lambda);
}

// G_ij = C_ij + lambda (log(c_j / b_j) + 1); +inf on zero-weight targets.
Eigen::MatrixXd gradient(const Eigen::MatrixXd& cost, const Eigen::MatrixXd& plan, const Eigen::VectorXd& b, double lambda) {
  const Eigen::VectorXd col = plan.colwise().sum().transpose();
  Eigen::MatrixXd g(cost.rows(), cost.cols());
  for (Eigen::Index j = 0; j < cost.cols(); ++j) {
    double kl_part = kInf;
    if (b(j) > 0.0) kl_part = lambda * (std::log(std::max(col(j), 1e-300) / b(j)) + 1.0);
    for (Eigen::Index i = 0; i < cost.rows(); ++i) g(i, j) = cost(i, j) + kl_part;
  }
  return g;
}

double gap(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& g) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    const double gmin = g.row(i).minCoeff();
    for (Eigen::Index j = 0; j < plan.cols(); ++j)
      if (plan(i, j) > 0.0) total += plan(i, j) * (g(i, j) - gmin);
  }
  return total;
}

// pi_ij <- pi_ij exp(-t (G_ij - min_k G_ik)), rows rescaled to a_i.
Eigen::MatrixXd eg_step(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& g, const Eigen::VectorXd& a, double t) {
  Eigen::MatrixXd next = plan;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    if (a(i) <= 0.0) continue;
    const double gmin = g.row(i).minCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      next(i, j) = plan(i, j) > 0.0 ? plan(i, j) * std::exp(-t * (g(i, j) - gmin)) : 0.0;
      sum += next(i, j);
    }
    next.row(i) *= a(i) / sum;
  }
  return next;
}

}  // namespace

SptOracleResult spt_oracle(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b, double kl_weight,
                           double tol, std::size_t max_iters) {
  if (cost.rows() * cost.cols() > 16) throw InputError("size_error", "spt_oracle is limited to n*m <= 16");
  if (a.size() != cost.rows() || b.size() != cost.cols()) throw InputError("shape_error", "marginal sizes do not match cost");
  SptOracleResult res;
  // Product coupling: feasible, zero KL penalty.
  Eigen::MatrixXd plan = a * b.transpose();
  double f = objective(cost, plan, b, kl_weight);
  double t = 1.0 / std::max(1.0, cost.cwiseAbs().maxCoeff());
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd g = gradient(cost, plan, b, kl_weight);
    res.gap = gap(plan, g);
    res.iterations = it;
    if (res.gap <= tol) {
      res.converged = true;
      break;
    }
    // Armijo backtracking on the mirror step.
    while (true) {
      const Eigen::MatrixXd cand = eg_step(plan, g, a, t);
      const double fc = objective(cost, cand, b, kl_weight);
      // Slack of a few ulps so steps whose decrease is below rounding still count.
      if (fc <= f - 1e-4 * ((g.array() * (plan - cand).array()).sum()) + 4e-16 * std::abs(f) || t < 1e-300) {
        plan = cand;
        f = fc;
        break;
      }
      t *= 0.5;
    }
    t *= 1.5;
  }
  res.value = f;
  res.plan = plan;
  return res;
}

SptOracleResult spt_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double kl_weight) {
  mu.validate();
  nu.validate();
  return spt_oracle(squared_euclidean_cost(mu.points, nu.points), mu.weights, nu.weights, kl_weight);
}

double spt_grid_2x2(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b, double resolution,
                    double kl_weight) {
  if (cost.rows() != 2 || cost.cols() != 2) throw InputError("shape_error", "grid oracle expects a 2x2 instance");
  const auto steps = static_cast<long>(std::llround(1.0 / resolution));
  double best = kInf;
  Eigen::MatrixXd plan(2, 2);
  for (long u = 0; u <= steps; ++u) {
    const double s = static_cast<double>(u) / static_cast<double>(steps);
    plan(0, 0) = a(0) * s;
    plan(0, 1) = a(0) * (1.0 - s);
    for (long v = 0; v <= steps; ++v) {
      const double r = static_cast<double>(v) / static_cast<double>(steps);
      plan(1, 0) = a(1) * r;
      plan(1, 1) = a(1) * (1.0 - r);
      best = std::min(best, spt_objective(cost, plan, b, kl_weight));
    }
  }
  return best;
}

double w2_bruteforce(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.size() != nu.size()) throw InputError("shape_error", "brute-force W2 needs equal sizes");
  if (mu.size() > 9) throw InputError("size_error", "brute-force W2 is limited to 9 atoms");
  const Eigen::MatrixXd cost = squared_euclidean_cost(mu.points, nu.points);
  std::vector<std::size_t> perm(mu.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = kInf;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) c += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(mu.size());
}

GradCheckReport gradient_check(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise, const DsmConfig& cfg,
                               double step, double target_sign) {
  const DsmResult analytic = detail::dsm_loss_and_grad_impl(net, batch, noise, cfg, target_sign, true);
  ScoreNetwork probe = net;
  auto loss_at = [&]() { return detail::dsm_loss_and_grad_impl(probe, batch, noise, cfg, target_sign, false).loss; };

  GradCheckReport rep;
  for (std::size_t k = 0; k < kBlockCount; ++k) {
    auto& block = probe.params().blocks[k];
    const auto& ga = analytic.grads.blocks[k];
    for (Eigen::Index e = 0; e < block.size(); ++e) {
      const double orig = block.data()[e];
      block.data()[e] = orig + step;
      const double up = loss_at();
      block.data()[e] = orig - step;
      const double down = loss_at();
      block.data()[e] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = ga.data()[e];
      // Entries whose gradient sits at the finite-difference noise floor carry no signal.
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++rep.checked_entries;
      if (rel > rep.max_relative_error || rep.worst_block.empty()) {
        rep.max_relative_error = std::max(rep.max_relative_error, rel);
        if (rel >= rep.max_relative_error) rep.worst_block = std::string(kBlockNames[k]);
      }
    }
  }
  return rep;
}

}  // namespace spirit::oracle
