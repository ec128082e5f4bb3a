#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace spirit::props {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs `body`, timing it and turning exceptions into failures.
PropertyResult timed(const std::string& name, const std::function<PropertyResult()>& body);

// Imputer invariants.
PropertyResult simplex_invariants(std::uint64_t seed);
PropertyResult teleport_weighted_mean_zero(std::uint64_t seed);
PropertyResult normalization_shift_invariance(std::uint64_t seed);
PropertyResult observed_entries_immutable(std::uint64_t seed);
PropertyResult energy_surrogate_monotone(std::uint64_t seed);

// Data and metrics.
PropertyResult mask_calibration(std::uint64_t seed);
PropertyResult standardize_roundtrip(std::uint64_t seed);
PropertyResult windowing_partition(std::uint64_t seed);
PropertyResult mae_squared_le_mse(std::uint64_t seed);

// Score network.
PropertyResult layer_norm_statistics(std::uint64_t seed);
PropertyResult dsm_oracle_zero(std::uint64_t seed, double target_sign = -1.0);

// Determinism of masks, training and full runs under a fixed seed.
PropertyResult determinism(std::uint64_t seed);

// Transport.
PropertyResult plan_feasibility(std::uint64_t seed);
PropertyResult config_roundtrip(std::uint64_t seed);

struct TransportOracleStats {
  std::size_t instances = 0;
  std::size_t oracle_failures = 0;
  std::size_t dominance_failures = 0;
  std::size_t self_failures = 0;
  double worst_oracle_gap = 0.0;  // |spt - oracle| / allowed tolerance
};
/// spt vs mirror-descent oracle, spt <= W2^2, spt(mu, mu) <= 2 eps log n on
/// random instances with n, m <= 4.
TransportOracleStats transport_oracle_sweep(std::size_t instances, std::uint64_t seed);
PropertyResult transport_oracles(std::size_t instances, std::uint64_t seed);

struct ContaminationSweepStats {
  std::size_t measures = 0;
  std::size_t bound_violations = 0;
  std::size_t monotonicity_violations = 0;
  std::size_t growth_violations = 0;
  double worst_bound_slack = 0.0;  // min over points of bound - spt
};
/// Contamination sweep over radii {2, 5, 10, 50, 100} with zeta = 0.1 on random
/// base measures with atoms in the unit box and the outlier on the ray away
/// from the box.
ContaminationSweepStats contamination_bound_sweep(std::size_t measures, std::uint64_t seed);
PropertyResult contamination_bound(std::size_t measures, std::uint64_t seed);

struct GradcheckStats {
  std::size_t networks = 0;
  double worst_relative_error = 0.0;
  std::string worst_block;
};
/// Random H = 8, TD = 12 networks with both loss weightings.
GradcheckStats gradcheck_sweep(std::size_t networks, std::uint64_t seed, double target_sign = -1.0);

std::vector<PropertyResult> run_property_suite(std::uint64_t seed = 0);
std::vector<PropertyResult> run_gradcheck_suite(std::size_t networks = 20, std::uint64_t seed = 0);

}  // namespace spirit::props
