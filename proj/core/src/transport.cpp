#include "spirit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

#include "spirit/error.hpp"
#include "spirit/rng.hpp"

namespace spirit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_uniform(const Eigen::VectorXd& w) {
  if (w.size() == 0) return true;
  return (w.array() - w(0)).abs().maxCoeff() <= 1e-12;
}

struct Potentials {
  Eigen::VectorXd f, g;
  std::size_t iterations = 0;
  double last_delta = kInf;
  bool converged = false;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

// Generalized scaling iterations in the log domain. Row update is a hard
// projection onto the fixed first marginal; the column update is the KL prox
// with exponent tau = lambda / (lambda + eps) (tau = 1 is balanced Sinkhorn).
void scaling_iterations(const Eigen::MatrixXd& cost, const Eigen::VectorXd& log_a, const Eigen::VectorXd& log_b,
                        double eps, double tau, Potentials& pot, std::size_t max_iters, double tol) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  Eigen::VectorXd buf_n(n), buf_m(m);
  pot.converged = false;
  for (std::size_t it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) buf_n(i) = (pot.f(i) - cost(i, j)) / eps;
      const double lse = log_sum_exp(buf_n);
      double gj = std::isfinite(lse) ? tau * (eps * log_b(j) - eps * lse) : -kInf;
      if (std::isnan(gj)) gj = -kInf;
      if (std::isfinite(gj) && std::isfinite(pot.g(j))) delta = std::max(delta, std::abs(gj - pot.g(j)));
      else if (std::isfinite(gj) != std::isfinite(pot.g(j))) delta = kInf;
      pot.g(j) = gj;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) buf_m(j) = (pot.g(j) - cost(i, j)) / eps;
      const double lse = log_sum_exp(buf_m);
      double fi = std::isfinite(log_a(i)) ? eps * log_a(i) - eps * lse : -kInf;
      if (std::isfinite(fi) && std::isfinite(pot.f(i))) delta = std::max(delta, std::abs(fi - pot.f(i)));
      else if (std::isfinite(fi) != std::isfinite(pot.f(i))) delta = kInf;
      pot.f(i) = fi;
    }
    ++pot.iterations;
    pot.last_delta = delta;
    if (delta <= tol) {
      pot.converged = true;
      return;
    }
  }
}

Eigen::MatrixXd plan_from_potentials(const Eigen::MatrixXd& cost, const Potentials& pot, double eps) {
  Eigen::MatrixXd plan(cost.rows(), cost.cols());
  for (Eigen::Index i = 0; i < cost.rows(); ++i)
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      const double e = (pot.f(i) + pot.g(j) - cost(i, j)) / eps;
      plan(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
    }
  return plan;
}

Eigen::VectorXd safe_log(const Eigen::VectorXd& w) {
  Eigen::VectorXd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out(i) = w(i) > 0.0 ? std::log(w(i)) : -kInf;
  return out;
}

// Runs a (possibly warm-started) epsilon schedule ending at `eps`.
Potentials solve_scaling(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b, double eps,
                         double kl_weight, bool balanced, bool warm_start, std::size_t max_iters, double tol) {
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const Eigen::VectorXd log_a = safe_log(a);
  const Eigen::VectorXd log_b = safe_log(b);
  Potentials pot;
  pot.f = Eigen::VectorXd::Zero(cost.rows());
  pot.g = Eigen::VectorXd::Zero(cost.cols());
  auto tau_for = [&](double e) { return balanced ? 1.0 : kl_weight / (kl_weight + e); };
  if (warm_start) {
    for (double e = 0.5 * scale; e > eps; e *= 0.5) {
      scaling_iterations(cost, log_a, log_b, e, tau_for(e), pot, 2000, 1e-6 * scale);
    }
  }
  pot.iterations = 0;
  scaling_iterations(cost, log_a, log_b, eps, tau_for(eps), pot, max_iters, tol * scale);
  return pot;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(RowMatrix points) {
  DiscreteMeasure m;
  const auto n = points.rows();
  m.points = std::move(points);
  m.weights = Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return m;
}

void DiscreteMeasure::validate() const {
  if (points.rows() == 0) throw InputError("invalid_measure", "measure has no atoms");
  if (weights.size() != points.rows()) throw InputError("invalid_measure", "weights/points size mismatch");
  if ((weights.array() < 0.0).any()) throw InputError("invalid_measure", "negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9) throw InputError("invalid_measure", "weights do not sum to one");
  if (!points.allFinite()) throw InputError("invalid_measure", "non-finite atom");
}

Eigen::MatrixXd squared_euclidean_cost(const RowMatrix& x, const RowMatrix& y) {
  if (x.cols() != y.cols()) throw InputError("shape_error", "measures live in different dimensions");
  Eigen::MatrixXd c(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) c(i, j) = (x.row(i) - y.row(j)).squaredNorm();
  return c;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double kl = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p(j) <= 0.0) continue;
    if (q(j) <= 0.0) return kInf;
    kl += p(j) * std::log(p(j) / q(j));
  }
  return std::max(kl, 0.0);
}

std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.rows() != cost.cols()) throw InputError("shape_error", "assignment needs a square cost matrix");
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

TransportPlan solve_transportation(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (supply.size() != cost.rows() || demand.size() != cost.cols()) throw InputError("shape_error", "marginal sizes do not match cost");
  if (std::abs(supply.sum() - demand.sum()) > 1e-9 * std::max(1.0, supply.sum()))
    throw InputError("invalid_measure", "supply and demand totals differ");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
  std::vector<char> basic(n * m, 0);
  auto at = [m](std::size_t i, std::size_t j) { return i * m + j; };

  // North-west corner start; degenerate ties keep exactly n + m - 1 basic cells.
  {
    Eigen::VectorXd ra = supply, rb = demand;
    std::size_t i = 0, j = 0;
    while (true) {
      const double q = std::max(0.0, std::min(ra(static_cast<Eigen::Index>(i)), rb(static_cast<Eigen::Index>(j))));
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q;
      basic[at(i, j)] = 1;
      ra(static_cast<Eigen::Index>(i)) -= q;
      rb(static_cast<Eigen::Index>(j)) -= q;
      if (i == n - 1 && j == m - 1) break;
      if (i == n - 1) ++j;
      else if (j == m - 1) ++i;
      else if (ra(static_cast<Eigen::Index>(i)) <= rb(static_cast<Eigen::Index>(j))) ++i;
      else ++j;
    }
  }

  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff());
  const std::size_t nodes = n + m;
  std::vector<double> pot(nodes);
  std::vector<char> seen(nodes);
  std::vector<std::size_t> parent(nodes);
  std::vector<std::vector<std::size_t>> adj(nodes);
  const std::size_t max_pivots = 50 * n * m + 1000;
  std::size_t pivots = 0;

  for (;; ++pivots) {
    if (pivots > max_pivots) throw NumericError("convergence", "transportation simplex exceeded its pivot budget");
    for (auto& a : adj) a.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (basic[at(i, j)]) {
          adj[i].push_back(n + j);
          adj[n + j].push_back(i);
        }
    // Potentials u_i + v_j = C_ij on the spanning tree of basic cells.
    std::fill(seen.begin(), seen.end(), 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    pot[0] = 0.0;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t nb : adj[node]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        const std::size_t i = node < n ? node : nb;
        const std::size_t j = (node < n ? nb : node) - n;
        pot[nb] = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - pot[node];
        queue.push_back(nb);
      }
    }

    // Bland: first nonbasic cell with negative reduced cost.
    std::size_t ei = n, ej = m;
    for (std::size_t i = 0; i < n && ei == n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (basic[at(i, j)]) continue;
        if (cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - pot[i] - pot[n + j] < -tol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei == n) break;

    // Tree path from column ej back to row ei closes the pivot cycle.
    std::fill(seen.begin(), seen.end(), 0);
    queue.assign(1, n + ej);
    seen[n + ej] = 1;
    while (!queue.empty() && !seen[ei]) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t nb : adj[node]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent[nb] = node;
        queue.push_back(nb);
      }
    }
    std::vector<std::size_t> path{ei};
    while (path.back() != n + ej) path.push_back(parent[path.back()]);
    std::reverse(path.begin(), path.end());  // col ej -> ... -> row ei

    std::vector<std::size_t> cells;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const std::size_t a = path[k], b = path[k + 1];
      const std::size_t i = a < n ? a : b;
      const std::size_t j = (a < n ? b : a) - n;
      cells.push_back(at(i, j));
    }
    double theta = kInf;
    std::size_t leave = n * m;
    for (std::size_t k = 0; k < cells.size(); k += 2) {
      const double q = x(static_cast<Eigen::Index>(cells[k] / m), static_cast<Eigen::Index>(cells[k] % m));
      if (q < theta || (q == theta && cells[k] < leave)) {
        theta = q;
        leave = cells[k];
      }
    }
    x(static_cast<Eigen::Index>(ei), static_cast<Eigen::Index>(ej)) = theta;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      auto& q = x(static_cast<Eigen::Index>(cells[k] / m), static_cast<Eigen::Index>(cells[k] % m));
      q += (k % 2 == 0) ? -theta : theta;
      if (q < 0.0) q = 0.0;
    }
    x(static_cast<Eigen::Index>(leave / m), static_cast<Eigen::Index>(leave % m)) = 0.0;
    basic[leave] = 0;
    basic[at(ei, ej)] = 1;
  }

  TransportPlan tp;
  tp.plan = x;
  tp.row_marginal = x.rowwise().sum();
  tp.col_marginal = x.colwise().sum().transpose();
  tp.cost_term = (cost.array() * x.array()).sum();
  tp.iterations = pivots;
  return tp;
}

TransportResult w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  mu.validate();
  nu.validate();
  if (mu.size() * nu.size() > kExactSizeLimit) {
    throw InputError("size_error", "exact W2 is limited to n*m <= 4096; use w2_sinkhorn for larger measures");
  }
  const Eigen::MatrixXd cost = squared_euclidean_cost(mu.points, nu.points);
  TransportResult res;
  if (mu.size() == nu.size() && is_uniform(mu.weights) && is_uniform(nu.weights)) {
    const auto assignment = solve_assignment(cost);
    const double w = 1.0 / static_cast<double>(mu.size());
    res.plan.plan = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
    for (std::size_t i = 0; i < assignment.size(); ++i)
      res.plan.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assignment[i])) = w;
    res.plan.row_marginal = res.plan.plan.rowwise().sum();
    res.plan.col_marginal = res.plan.plan.colwise().sum().transpose();
    res.plan.cost_term = (cost.array() * res.plan.plan.array()).sum();
  } else {
    res.plan = solve_transportation(cost, mu.weights, nu.weights);
  }
  res.value = res.plan.cost_term;
  return res;
}

TransportResult w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double epsilon, std::size_t max_iters,
                            double tolerance) {
  mu.validate();
  nu.validate();
  if (!(epsilon > 0.0)) throw InputError("invalid_config", "epsilon must be positive");
  const Eigen::MatrixXd cost = squared_euclidean_cost(mu.points, nu.points);
  const Potentials pot = solve_scaling(cost, mu.weights, nu.weights, epsilon, 1.0, true, true, max_iters, tolerance);
  if (!pot.converged) {
    throw NumericError("convergence", "Sinkhorn did not converge; final potential change " + std::to_string(pot.last_delta));
  }
  TransportResult res;
  res.plan.plan = plan_from_potentials(cost, pot, epsilon);
  res.plan.row_marginal = res.plan.plan.rowwise().sum();
  res.plan.col_marginal = res.plan.plan.colwise().sum().transpose();
  res.plan.cost_term = (cost.array() * res.plan.plan.array()).sum();
  res.plan.epsilon = epsilon;
  res.plan.iterations = pot.iterations;
  res.value = res.plan.cost_term;
  return res;
}

void SptSolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw InputError("invalid_config", "spt epsilon must be positive");
  if (!(kl_weight > 0.0)) throw InputError("invalid_config", "spt kl_weight must be positive");
  if (!(tolerance > 0.0)) throw InputError("invalid_config", "spt tolerance must be positive");
  if (refine_epsilon < 0.0 || (refine_epsilon > 0.0 && refine_epsilon >= epsilon))
    throw InputError("invalid_config", "spt refine_epsilon must be below epsilon");
}

double spt_objective(const Eigen::MatrixXd& cost, const Eigen::MatrixXd& plan, const Eigen::VectorXd& target, double kl_weight) {
  const Eigen::VectorXd col = plan.colwise().sum().transpose();
  return (cost.array() * plan.array()).sum() + kl_weight * kl_divergence(col, target);
}

TransportResult spt(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b, const SptSolverConfig& cfg) {
  cfg.validate();
  if (a.size() != cost.rows() || b.size() != cost.cols()) throw InputError("shape_error", "marginal sizes do not match cost");
  Potentials pot = solve_scaling(cost, a, b, cfg.epsilon, cfg.kl_weight, false, cfg.warm_start, cfg.max_iters, cfg.tolerance);
  double eps = cfg.epsilon;
  if (pot.converged && cfg.refine_epsilon > 0.0) {
    const Eigen::VectorXd log_a = safe_log(a), log_b = safe_log(b);
    const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
    while (pot.converged && eps > cfg.refine_epsilon) {
      eps = std::max(cfg.refine_epsilon, 0.5 * eps);
      scaling_iterations(cost, log_a, log_b, eps, cfg.kl_weight / (cfg.kl_weight + eps), pot, cfg.max_iters,
                         cfg.tolerance * scale);
    }
  }
  if (!pot.converged) {
    throw NumericError("convergence", "SPT scaling iterations did not converge; final marginal residual " +
                                          std::to_string(pot.last_delta));
  }
  TransportResult res;
  auto& tp = res.plan;
  tp.plan = plan_from_potentials(cost, pot, eps);
  tp.row_marginal = tp.plan.rowwise().sum();
  tp.col_marginal = tp.plan.colwise().sum().transpose();
  tp.cost_term = (cost.array() * tp.plan.array()).sum();
  tp.kl_term = kl_divergence(tp.col_marginal, b);
  tp.infeasible_column = !std::isfinite(tp.kl_term);
  tp.epsilon = eps;
  tp.iterations = pot.iterations;
  res.value = tp.cost_term + cfg.kl_weight * tp.kl_term;
  return res;
}

TransportResult spt(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SptSolverConfig& cfg) {
  mu.validate();
  nu.validate();
  return spt(squared_euclidean_cost(mu.points, nu.points), mu.weights, nu.weights, cfg);
}

void ContaminationSpec::validate() const {
  if (!(zeta > 0.0 && zeta < 1.0)) throw InputError("invalid_config", "contamination zeta must lie in (0, 1)");
  if (z.size() == 0 || !z.allFinite()) throw InputError("invalid_config", "outlier location must be a finite vector");
}

DiscreteMeasure contaminate(const DiscreteMeasure& nu, double zeta, const Eigen::VectorXd& z) {
  ContaminationSpec{zeta, z}.validate();
  if (z.size() != nu.points.cols()) throw InputError("shape_error", "outlier dimension mismatch");
  DiscreteMeasure out;
  out.points.resize(nu.points.rows() + 1, nu.points.cols());
  out.points.topRows(nu.points.rows()) = nu.points;
  out.points.row(nu.points.rows()) = z.transpose();
  out.weights.resize(nu.weights.size() + 1);
  out.weights.head(nu.weights.size()) = (1.0 - zeta) * nu.weights;
  out.weights(nu.weights.size()) = zeta;
  return out;
}

double contamination_constant(double zeta) {
  return (1.0 - zeta) * std::log(1.0 / (1.0 - zeta)) - zeta * std::log(zeta);
}

double mean_squared_distance(const DiscreteMeasure& mu, const Eigen::VectorXd& z) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.points.rows(); ++i) acc += mu.weights(i) * (mu.points.row(i).transpose() - z).squaredNorm();
  return acc;
}

double spt_contamination_bound(double base_spt, double zeta, double mean_sq_distance) {
  return (1.0 - zeta) * base_spt + zeta * (1.0 - std::exp(-mean_sq_distance)) + contamination_constant(zeta);
}

std::vector<RobustnessRow> robustness_bench(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ContaminationSpec& spec,
                                            const std::vector<double>& radii, const SptSolverConfig& cfg) {
  spec.validate();
  const Eigen::VectorXd direction = spec.z.normalized();
  const double base = spt(mu, nu, cfg).value;
  std::vector<RobustnessRow> rows;
  rows.reserve(radii.size());
  for (double r : radii) {
    const Eigen::VectorXd z = r * direction;
    const DiscreteMeasure contaminated = contaminate(nu, spec.zeta, z);
    RobustnessRow row;
    row.radius = r;
    row.w2 = w2_exact(mu, contaminated).value;
    row.spt = spt(mu, contaminated, cfg).value;
    row.mean_sq_distance = mean_squared_distance(mu, z);
    row.bound = spt_contamination_bound(base, spec.zeta, row.mean_sq_distance);
    rows.push_back(row);
  }
  return rows;
}

void write_plan_csv(const TransportPlan& plan, std::ostream& out, double min_mass) {
  out << "i,j,mass\n";
  for (Eigen::Index i = 0; i < plan.plan.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.plan.cols(); ++j)
      if (plan.plan(i, j) > min_mass) out << i << ',' << j << ',' << plan.plan(i, j) << '\n';
}

void write_bench_csv(const std::vector<RobustnessRow>& rows, std::ostream& out) {
  out << "radius,w2,spt,bound\n";
  for (const auto& r : rows) out << r.radius << ',' << r.w2 << ',' << r.spt << ',' << r.bound << '\n';
}

ToyMatching toy_matching_figure(std::uint64_t seed, const SptSolverConfig& cfg) {
  Rng rng(seed, {0x746f79ULL});
  constexpr int kSourcePerMode = 20;
  constexpr int kTargetLeft = 26;
  constexpr int kTargetRight = 14;
  constexpr int kOutliers = 4;
  auto blob = [&rng](RowMatrix& pts, Eigen::Index row, double cx, double cy, double sd) {
    pts(row, 0) = rng.normal(cx, sd);
    pts(row, 1) = rng.normal(cy, sd);
  };

  RowMatrix src(2 * kSourcePerMode, 2);
  for (int k = 0; k < kSourcePerMode; ++k) {
    blob(src, k, -2.0, 0.0, 0.3);
    blob(src, kSourcePerMode + k, 2.0, 0.0, 0.3);
  }
  // Unbalanced target modes: a mass-preserving plan must push part of the
  // right source mode across to the left target mode.
  RowMatrix tgt(kTargetLeft + kTargetRight + kOutliers, 2);
  for (int k = 0; k < kTargetLeft; ++k) blob(tgt, k, -2.0, -0.5, 0.3);
  for (int k = 0; k < kTargetRight; ++k) blob(tgt, kTargetLeft + k, 2.0, -0.5, 0.3);
  for (int k = 0; k < kOutliers; ++k) blob(tgt, kTargetLeft + kTargetRight + k, 0.0, 3.5, 0.15);

  ToyMatching toy;
  toy.source = DiscreteMeasure::uniform(src);
  toy.target = DiscreteMeasure::uniform(tgt);
  for (int k = 0; k < kOutliers; ++k) toy.outlier_atoms.push_back(static_cast<std::size_t>(kTargetLeft + kTargetRight + k));
  for (auto j : toy.outlier_atoms) toy.outlier_target_weight += toy.target.weights(static_cast<Eigen::Index>(j));

  toy.ot = w2_exact(toy.source, toy.target);
  toy.spt = spt(toy.source, toy.target, cfg);

  auto outlier_mass = [&](const TransportPlan& p) {
    double mass = 0.0;
    for (auto j : toy.outlier_atoms) mass += p.col_marginal(static_cast<Eigen::Index>(j));
    return mass;
  };
  auto cross_mass = [&](const TransportPlan& p) {
    double mass = 0.0;
    for (Eigen::Index i = 0; i < p.plan.rows(); ++i)
      for (Eigen::Index j = 0; j < kTargetLeft + kTargetRight; ++j) {
        const bool src_left = i < kSourcePerMode;
        const bool tgt_left = j < kTargetLeft;
        if (src_left != tgt_left) mass += p.plan(i, j);
      }
    return mass;
  };
  toy.ot_outlier_mass = outlier_mass(toy.ot.plan);
  toy.spt_outlier_mass = outlier_mass(toy.spt.plan);
  toy.ot_cross_mode_mass = cross_mass(toy.ot.plan);
  toy.spt_cross_mode_mass = cross_mass(toy.spt.plan);
  return toy;
}

}  // namespace spirit
