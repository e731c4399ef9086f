#pragma once

#include "mlpbsde/problem.hpp"
#include "mlpbsde/sampling.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mlpbsde {

inline constexpr int kMaxDepth = 10;

enum class Variant { original, modified };

const char* variant_name(Variant v);
/// Throws InvalidConfig for anything but "original" or "modified".
Variant parse_variant(std::string_view name);

struct MlpConfig {
    Variant variant = Variant::modified;
    int depth = 1;         // n
    int base_samples = 1;  // M
    int quad_order = 1;    // Q
    std::uint64_t seed = 0;
    bool estimate_z = false;
    // Modified scheme only: take y_{n-2} at each sampled point from the y_{n-1}
    // evaluation there instead of recomputing it.
    bool reuse_cache = true;
    // Modified scheme only: leading z term as z^i_{n-1} W_{T-t} / (T-t),
    // componentwise, instead of the plain average of the copies.
    bool strict_printed_form = false;
    // Worker threads for the top recursion frame. 0 picks the hardware count.
    int threads = 1;
};

/// Throws InvalidConfig unless 0 <= depth <= kMaxDepth, M >= 1, 1 <= Q <= 64,
/// threads >= 0, and the original scheme's M^depth sample count fits in 2^53.
void check_config(const MlpConfig& config);

/// Resolved worker count: threads, or the hardware count when 0.
int resolve_threads(int threads);

struct CostCounters {
    std::uint64_t generator_evals = 0;
    std::uint64_t terminal_evals = 0;
    std::uint64_t gaussian_draws = 0;  // scalar N(0, 1) values
    std::uint64_t cache_hits = 0;

    CostCounters& operator+=(const CostCounters& o);
    friend bool operator==(const CostCounters&, const CostCounters&) = default;
};

struct Estimate {
    double y = 0.0;
    std::optional<std::vector<double>> z;
    CostCounters cost;
    // Sum of every quadrature-weighted generator contribution in the tree, as it
    // enters y. Exactly zero when f vanishes identically.
    double difference_term = 0.0;
};

/// y_n (and z_n when config.estimate_z) at (t, x), dispatching on config.variant.
/// Streams hang off StreamKey(config.seed).
Estimate estimate(const BsdeProblem& problem, const MlpConfig& config, double t,
                  std::span<const double> x);

Estimate estimate_original(const BsdeProblem& problem, const MlpConfig& config, double t,
                           std::span<const double> x);
Estimate estimate_modified(const BsdeProblem& problem, const MlpConfig& config, double t,
                           std::span<const double> x);

/// As estimate(), with an explicit root key in place of StreamKey(config.seed).
Estimate estimate_at(const BsdeProblem& problem, const MlpConfig& config, double t,
                     std::span<const double> x, const StreamKey& key);

/// Key of the i-th i.i.d. copy of y_{n-1} used by the modified frame of depth n.
StreamKey copy_key(const StreamKey& key, int depth, std::int64_t copy);

struct PairedEstimate {
    Estimate upper;  // y_k at (t, x)
    Estimate lower;  // y_{k-1} at (t, x), the first copy built inside upper
    CostCounters cost;
};

/// Modified-scheme y_k and y_{k-1} from one recursion tree. The lower value is
/// the copy with key copy_key(key, k, 0); it is zero for k = 1.
PairedEstimate paired_recursion(const BsdeProblem& problem, const MlpConfig& config, double t,
                                std::span<const double> x, int depth);
PairedEstimate paired_recursion(const BsdeProblem& problem, const MlpConfig& config, double t,
                                std::span<const double> x, int depth, const StreamKey& key);

/// Generator evaluations of one estimate at the given depth, from the exact cost
/// recurrences of each scheme (z-free generator).
std::uint64_t predicted_generator_evals(Variant variant, int depth, int base_samples,
                                        int quad_order, bool reuse_cache = true);

} // namespace mlpbsde
