#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "spirit/scorenet.hpp"
#include "spirit/transport.hpp"

namespace spirit::oracle {

struct SptOracleResult {
  double value = 0.0;
  double gap = 0.0;  // certified suboptimality bound of the returned plan
  std::size_t iterations = 0;
  bool converged = false;
  Eigen::MatrixXd plan;
};

/// Exponentiated-gradient (mirror) descent on the rows of the plan, each row
/// kept on the simplex scaled by a_i, for sum C .* pi + lambda KL(pi^T 1 || b).
/// Stops once the linearization gap sum_ij pi_ij (G_ij - min_k G_ik) <= tol,
/// which bounds the distance to the optimal value. Requires n*m <= 16.
SptOracleResult spt_oracle(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                           double kl_weight = 1.0, double tol = 1e-8, std::size_t max_iters = 2000000);
SptOracleResult spt_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double kl_weight = 1.0);

/// Exhaustive search over a 2x2 plan: each row splits its mass on a grid of
/// the 1-simplex with the given resolution.
double spt_grid_2x2(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b, double resolution = 1e-3,
                    double kl_weight = 1.0);

/// Squared W2 between equal-size uniform measures by enumerating all matchings.
double w2_bruteforce(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Central finite differences of the DSM loss (fixed noise) against the
/// analytic reverse-mode gradients, over every parameter entry.
GradCheckReport gradient_check(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise, const DsmConfig& cfg,
                               double step = 1e-4, double target_sign = -1.0);

}  // namespace spirit::oracle
