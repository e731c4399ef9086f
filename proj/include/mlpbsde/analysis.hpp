#pragma once

#include "mlpbsde/mlp.hpp"
#include "mlpbsde/problem.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mlpbsde {

/// Bias and standard-deviation bounds for the modified scheme with a z-free
/// generator:
///   bias <= n C2 C_d Q^{1/2} (e/8Q)^{2Q}
///         + (C1/sqrt M)^n exp(C_f sqrt M (T-t)(1 + 1/C1))
///         + C_y (T-t)^n C_f^n / n!
///   std  <= (C1/sqrt M) exp(C_f sqrt M (T-t))
/// with C1 = max(2a, C_phi + C_0 T), a = 1 + 1/sqrt M, and
///   C2 = (e^{1/3} sqrt(pi) / 2) sup_k C_f^{k-1} T^{2Q+k} / ((2Q+1)...(2Q+k)).
struct TheoremBound {
    double bias_bound = 0.0;
    double variance_bound = 0.0;  // bound on the standard deviation
    double quadrature_term = 0.0;
    double mc_term = 0.0;
    double picard_term = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double epsilon = 0.0;  // per-step quadrature error quadrature_error_bound(Q, t, T, C_d)
};

/// Throws TheoremNotApplicable for z-dependent generators or the original
/// variant, MissingBounds when any of C_f, C_0, C_phi, C_y, C_d is undeclared,
/// InvalidTime unless 0 <= t <= T.
TheoremBound theorem_bound(const BsdeProblem& problem, const MlpConfig& config, double t);

/// sup_{k >= 1} C_f^{k-1} T^{2Q+k} / ((2Q+1)...(2Q+k)), scanned in log space
/// until the terms decrease and drop below 1e-300.
double c2_supremum(double lipschitz, double horizon, int quad_order);

/// Space quadrature for the one-dimensional oracle: composite Gauss-Legendre
/// (panels x order nodes) on +-8 standard deviations of each Gaussian increment.
struct SpaceQuadrature {
    int panels = 4;
    int order = 50;
};

/// Deterministic quadrature Picard iterate
///   y^k(t,x) = E phi(x + W_{T-t}) + sum_j w_j E f(t_j, y^{k-1}(t_j, x + W_{t_j - t}), 0)
/// with y^0 = 0, the Q-point Gauss-Legendre rule on [t, T] at every step, and
/// Gaussian expectations by space quadrature. Each intermediate y^k(t_j, .) is
/// held as a Chebyshev interpolant over the region the outer steps can reach.
/// Throws OracleUnavailable unless dim = 1, the generator ignores z and
/// depth <= 6.
double deterministic_picard(const BsdeProblem& problem, int depth, int quad_order, double t, double x,
                            const SpaceQuadrature& space = {});

struct CostMeans {
    double generator_evals = 0.0;
    double terminal_evals = 0.0;
    double gaussian_draws = 0.0;
    double cache_hits = 0.0;
};

struct RunStats {
    int replications = 0;
    double mean_y = 0.0;
    double std_y = 0.0;  // unbiased sample standard deviation
    std::optional<double> abs_error;
    CostMeans mean_cost;
    std::vector<double> values;  // y of each replication, in replication order
};

/// R runs with seeds derive_seed(config.seed, r), r = 0..R-1. Replications are
/// spread over config.threads workers; the statistics do not depend on it.
RunStats run_replications(const BsdeProblem& problem, const MlpConfig& config, double t,
                          std::span<const double> x, int replications);

/// As above with explicit per-replication seeds.
RunStats run_replications(const BsdeProblem& problem, const MlpConfig& config, double t,
                          std::span<const double> x, std::span<const std::uint64_t> seeds);

} // namespace mlpbsde
