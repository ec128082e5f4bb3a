#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "spirit/data.hpp"

namespace spirit {

/// Weighted atoms sum_i w_i delta_{x_i}.
struct DiscreteMeasure {
  RowMatrix points;         // [n x d]
  Eigen::VectorXd weights;  // [n], on the simplex

  static DiscreteMeasure uniform(RowMatrix points);
  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  void validate() const;
};

struct TransportPlan {
  Eigen::MatrixXd plan;  // [n x m], nonnegative
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;
  double cost_term = 0.0;  // sum C .* plan
  double kl_term = 0.0;    // KL(col_marginal || target), 0 for balanced plans
  double epsilon = 0.0;    // entropic smoothing used, 0 for exact solvers
  std::size_t iterations = 0;
  bool infeasible_column = false;  // mass sent to a zero-weight target atom
};

struct TransportResult {
  double value = 0.0;
  TransportPlan plan;
};

Eigen::MatrixXd squared_euclidean_cost(const RowMatrix& x, const RowMatrix& y);

/// KL(p || q) with 0 log 0 = 0; +inf when p_j > 0 where q_j = 0.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns assignment[i] = column matched to row i.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

/// Exact transportation problem via the transportation simplex with
/// Bland's rule for entering and leaving cells.
TransportPlan solve_transportation(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply, const Eigen::VectorXd& demand);

inline constexpr std::size_t kExactSizeLimit = 4096;

/// Squared 2-Wasserstein distance. Assignment when n = m with uniform weights,
/// transportation simplex otherwise. Requires n*m <= 4096.
TransportResult w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Entropically smoothed balanced OT (log-domain Sinkhorn) for instances
/// beyond the exact solver's size limit. Value is the transport cost of the plan.
TransportResult w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double epsilon = 1e-2,
                            std::size_t max_iters = 100000, double tolerance = 1e-9);

struct SptSolverConfig {
  double epsilon = 1e-3;       // entropic smoothing of the plan
  double kl_weight = 1.0;      // multiplier of KL(pi_y || nu)
  std::size_t max_iters = 200000;
  double tolerance = 1e-10;    // sup-norm change of the dual potentials
  bool warm_start = true;      // geometric epsilon schedule from the cost scale down to `epsilon`
  double refine_epsilon = 0.0; // optional halving continuation below `epsilon` (e.g. 1e-4)

  void validate() const;
};

/// Semi-relaxed transport objective sum C .* pi + kl_weight * KL(pi^T 1 || b)
/// evaluated at a given plan.
double spt_objective(const Eigen::MatrixXd& cost, const Eigen::MatrixXd& plan, const Eigen::VectorXd& target,
                     double kl_weight = 1.0);

/// Semi-relaxed transport discrepancy: first marginal fixed to mu, second
/// marginal penalized by KL to nu. Generalized scaling iterations in the log
/// domain: hard row projection and KL-prox column update. The returned value is
/// the unsmoothed objective at the smoothed plan; it exceeds the exact minimum
/// by at most epsilon * log(m).
TransportResult spt(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SptSolverConfig& cfg = {});
TransportResult spt(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                    const SptSolverConfig& cfg = {});

struct ContaminationSpec {
  double zeta = 0.1;
  Eigen::VectorXd z;  // outlier location (its direction is reused by sweeps)

  void validate() const;
};

/// (1 - zeta) nu + zeta delta_z, appended as an extra atom.
DiscreteMeasure contaminate(const DiscreteMeasure& nu, double zeta, const Eigen::VectorXd& z);

/// C(zeta) = (1 - zeta) log(1 / (1 - zeta)) - zeta log zeta.
double contamination_constant(double zeta);

/// D(z) = integral ||z - x||^2 dmu(x).
double mean_squared_distance(const DiscreteMeasure& mu, const Eigen::VectorXd& z);

/// (1 - zeta) S(mu, nu) + zeta (1 - exp(-D(z))) + C(zeta).
double spt_contamination_bound(double base_spt, double zeta, double mean_sq_distance);

struct RobustnessRow {
  double radius = 0.0;
  double w2 = 0.0;
  double spt = 0.0;
  double bound = 0.0;
  double mean_sq_distance = 0.0;
};

/// For every radius r, places the outlier at r * z / |z|, contaminates nu, and
/// reports W2^2, SPT and the contamination upper bound.
std::vector<RobustnessRow> robustness_bench(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                            const ContaminationSpec& spec, const std::vector<double>& radii,
                                            const SptSolverConfig& cfg = {});

void write_plan_csv(const TransportPlan& plan, std::ostream& out, double min_mass = 0.0);
void write_bench_csv(const std::vector<RobustnessRow>& rows, std::ostream& out);

/// Two-mode source vs. two-mode target plus a small transient outlier cluster.
struct ToyMatching {
  DiscreteMeasure source;
  DiscreteMeasure target;
  std::vector<std::size_t> outlier_atoms;  // indices into target
  double outlier_target_weight = 0.0;
  TransportResult ot;
  TransportResult spt;
  double ot_outlier_mass = 0.0;
  double spt_outlier_mass = 0.0;
  double ot_cross_mode_mass = 0.0;   // mass moved between opposite modes
  double spt_cross_mode_mass = 0.0;
};

ToyMatching toy_matching_figure(std::uint64_t seed, const SptSolverConfig& cfg = {});

}  // namespace spirit
