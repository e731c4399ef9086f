#include "mlpbsde/analysis.hpp"

#include "mlpbsde/errors.hpp"
#include "mlpbsde/quadrature.hpp"
#include "mlpbsde/sampling.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace mlpbsde {

namespace {

constexpr int kMaxOracleDepth = 6;

// y^k(s, .) on [lo, hi] as a Chebyshev interpolant (second-kind points).
struct Interpolant {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> nodes;
    std::vector<double> values;

    double operator()(double x) const {
        const std::size_t n = nodes.size();
        const double c = std::clamp((2.0 * x - (lo + hi)) / (hi - lo), -1.0, 1.0);
        double num = 0.0, den = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double diff = c - nodes[m];
            if (diff == 0.0) return values[m];
            double w = (m % 2 == 0) ? 1.0 : -1.0;
            if (m == 0 || m + 1 == n) w *= 0.5;
            w /= diff;
            num += w * values[m];
            den += w;
        }
        return num / den;
    }
};

class PicardOracle {
public:
    PicardOracle(const BsdeProblem& p, int q, const SpaceQuadrature& space)
        : p_(p), unit_(gaussian_rule(1.0, space.panels, space.order)) {
        const auto ref = build_rule(q, -1.0, 1.0);
        ref_nodes_.assign(ref.nodes.begin(), ref.nodes.end());
        ref_weights_.assign(ref.weights.begin(), ref.weights.end());
        reach_ = std::max(std::fabs(unit_.nodes.front()), std::fabs(unit_.nodes.back()));
    }

    // y^k(s, x) for every x in xs.
    std::vector<double> values(int k, double s, double lo, double hi, const std::vector<double>& xs) const {
        const double horizon = p_.horizon;
        const long double len = static_cast<long double>(horizon) - s;
        const long double mid = static_cast<long double>(horizon) + s;
        const std::size_t q = ref_nodes_.size();
        std::vector<double> tj(q), wj(q);
        for (std::size_t j = 0; j < q; ++j) {
            tj[j] = static_cast<double>((ref_nodes_[j] * len + mid) / 2.0L);
            wj[j] = static_cast<double>(ref_weights_[j] * len / 2.0L);
        }

        std::vector<Interpolant> children;
        if (k >= 2) {
            children.reserve(q);
            for (std::size_t j = 0; j < q; ++j) {
                const double sd = std::sqrt(tj[j] - s);
                children.push_back(build(k - 1, tj[j], lo - reach_ * sd, hi + reach_ * sd));
            }
        }

        const double sd_terminal = std::sqrt(horizon - s);
        std::vector<double> out(xs.size());
        const std::vector<double> zero{0.0};
        double point[1];
        for (std::size_t m = 0; m < xs.size(); ++m) {
            double terminal = 0.0;
            for (std::size_t r = 0; r < unit_.nodes.size(); ++r) {
                point[0] = xs[m] + sd_terminal * unit_.nodes[r];
                terminal += unit_.weights[r] * p_.terminal(point);
            }
            double integral = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                double expected;
                if (k == 1) {
                    expected = p_.generator(tj[j], 0.0, zero);
                } else {
                    const double sd = std::sqrt(tj[j] - s);
                    expected = 0.0;
                    for (std::size_t r = 0; r < unit_.nodes.size(); ++r) {
                        const double y = children[j](xs[m] + sd * unit_.nodes[r]);
                        expected += unit_.weights[r] * p_.generator(tj[j], y, zero);
                    }
                }
                integral += wj[j] * expected;
            }
            out[m] = terminal + integral;
        }
        return out;
    }

private:
    Interpolant build(int k, double s, double lo, double hi) const {
        Interpolant f;
        f.lo = lo;
        f.hi = hi;
        const double half = 0.5 * (hi - lo);
        const auto n = static_cast<std::size_t>(std::min(2000.0, std::ceil(1.5 * half + 48.0)));
        f.nodes.resize(n);
        std::vector<double> xs(n);
        for (std::size_t m = 0; m < n; ++m) {
            f.nodes[m] = std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(n - 1));
            xs[m] = 0.5 * (lo + hi) + half * f.nodes[m];
        }
        f.values = values(k, s, lo, hi, xs);
        return f;
    }

    const BsdeProblem& p_;
    GaussianRule unit_;
    std::vector<long double> ref_nodes_;
    std::vector<long double> ref_weights_;
    double reach_ = 0.0;
};

} // namespace

double c2_supremum(double lipschitz, double horizon, int quad_order) {
    if (!(lipschitz >= 0.0) || !(horizon > 0.0) || quad_order < 1) {
        throw InvalidConfig("C2 needs C_f >= 0, T > 0 and Q >= 1");
    }
    const double two_q = 2.0 * quad_order;
    // k = 1 term: T^{2Q+1} / (2Q+1).
    double log_term = (two_q + 1.0) * std::log(horizon) - std::log(two_q + 1.0);
    double best = log_term;
    if (lipschitz == 0.0) return std::exp(best);
    const double log_ct = std::log(lipschitz * horizon);
    const double floor_log = std::log(1e-300);
    for (long k = 1; k < 100'000'000; ++k) {
        const double ratio_log = log_ct - std::log(two_q + static_cast<double>(k) + 1.0);
        log_term += ratio_log;
        best = std::max(best, log_term);
        if (ratio_log < 0.0 && log_term < floor_log) break;
    }
    return std::exp(best);
}

TheoremBound theorem_bound(const BsdeProblem& p, const MlpConfig& c, double t) {
    if (p.generator_uses_z) {
        throw TheoremNotApplicable("bias bound covers generators independent of z only");
    }
    if (c.variant != Variant::modified) {
        throw TheoremNotApplicable("bias bound is stated for the modified scheme");
    }
    const auto& b = p.bounds;
    std::string missing;
    const auto need = [&](const std::optional<double>& v, const char* name) {
        if (!v) missing += missing.empty() ? name : std::string(", ") + name;
    };
    need(b.lipschitz, "C_f");
    need(b.generator_zero, "C_0");
    need(b.terminal, "C_phi");
    need(b.solution, "C_y");
    need(b.derivative, "C_d");
    if (!missing.empty()) throw MissingBounds("undeclared constants: " + missing);
    check_config(c);
    if (!(t >= 0.0 && t <= p.horizon)) throw InvalidTime("bound needs 0 <= t <= T");

    const int n = c.depth;
    const double q = c.quad_order;
    const double root_m = std::sqrt(static_cast<double>(c.base_samples));
    const double cf = *b.lipschitz;
    const double gap = p.horizon - t;

    TheoremBound out;
    const double a = 1.0 + 1.0 / root_m;
    out.c1 = std::max(2.0 * a, *b.terminal + *b.generator_zero * p.horizon);
    out.c2 = std::exp(1.0 / 3.0) * std::sqrt(std::numbers::pi) / 2.0 * c2_supremum(cf, p.horizon, c.quad_order);
    out.quadrature_term = n * out.c2 * *b.derivative * std::sqrt(q) * std::pow(std::numbers::e / (8.0 * q), 2.0 * q);
    out.mc_term = std::pow(out.c1 / root_m, n) * std::exp(cf * root_m * gap * (1.0 + 1.0 / out.c1));
    out.picard_term = *b.solution * std::pow(gap * cf, n) / std::tgamma(n + 1.0);
    out.bias_bound = out.quadrature_term + out.mc_term + out.picard_term;
    out.variance_bound = out.c1 / root_m * std::exp(cf * root_m * gap);
    out.epsilon = quadrature_error_bound(c.quad_order, t, p.horizon, *b.derivative);
    return out;
}

double deterministic_picard(const BsdeProblem& p, int depth, int quad_order, double t, double x,
                            const SpaceQuadrature& space) {
    check_problem(p);
    if (p.dim != 1) throw OracleUnavailable("deterministic Picard oracle is one-dimensional only");
    if (p.generator_uses_z) throw OracleUnavailable("deterministic Picard oracle needs a z-free generator");
    if (depth < 0) throw InvalidConfig("depth must be >= 0");
    if (depth > kMaxOracleDepth) throw OracleUnavailable("deterministic Picard oracle supports depth <= 6");
    if (quad_order < 1 || quad_order > kMaxQuadratureOrder) throw InvalidConfig("quad_order must lie in 1..64");
    if (!(t >= 0.0 && t < p.horizon)) throw InvalidTime("oracle needs 0 <= t < T");
    if (depth == 0) return 0.0;
    const PicardOracle oracle(p, quad_order, space);
    return oracle.values(depth, t, x, x, {x}).front();
}

RunStats run_replications(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x,
                          std::span<const std::uint64_t> seeds) {
    if (seeds.size() < 2) throw InvalidConfig("replications must be >= 2");
    check_config(c);
    std::vector<Estimate> runs(seeds.size());
    detail::for_each_index(runs.size(), resolve_threads(c.threads), [&](std::size_t r) {
        MlpConfig one = c;
        one.seed = seeds[r];
        one.threads = 1;
        runs[r] = estimate(p, one, t, x);
    });

    RunStats s;
    s.replications = static_cast<int>(runs.size());
    const double count = static_cast<double>(runs.size());
    s.values.reserve(runs.size());
    double sum = 0.0;
    CostCounters total;
    for (const auto& e : runs) {
        s.values.push_back(e.y);
        sum += e.y;
        total += e.cost;
    }
    s.mean_y = sum / count;
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean_y) * (v - s.mean_y);
    s.std_y = std::sqrt(ss / (count - 1.0));
    if (p.reference) s.abs_error = std::fabs(s.mean_y - p.reference->u(t, x));
    s.mean_cost.generator_evals = static_cast<double>(total.generator_evals) / count;
    s.mean_cost.terminal_evals = static_cast<double>(total.terminal_evals) / count;
    s.mean_cost.gaussian_draws = static_cast<double>(total.gaussian_draws) / count;
    s.mean_cost.cache_hits = static_cast<double>(total.cache_hits) / count;
    return s;
}

RunStats run_replications(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x,
                          int replications) {
    if (replications < 2) throw InvalidConfig("replications must be >= 2");
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(replications));
    for (std::size_t r = 0; r < seeds.size(); ++r) seeds[r] = derive_seed(c.seed, r);
    return run_replications(p, c, t, x, seeds);
}

} // namespace mlpbsde
