#include "mlpbsde/mlp.hpp"

#include "mlpbsde/errors.hpp"
#include "mlpbsde/quadrature.hpp"
#include "parallel.hpp"

#include <cmath>
#include <string>
#include <thread>

namespace mlpbsde {

namespace {

enum Slot : int { kCopy = 0, kPoint = 1, kTerminal = 2, kEval = 3, kEvalLower = 4, kKernel = 5 };

constexpr double kMinGap = 1e-12;

void require_gap(double gap, const char* what) {
    if (!(gap > kMinGap)) {
        throw InvalidTime(std::string(what) + " must exceed 1e-12, got " + std::to_string(gap));
    }
}

std::uint64_t checked_power(int base, int exponent) {
    std::uint64_t out = 1;
    for (int k = 0; k < exponent; ++k) {
        if (out > (std::uint64_t{1} << 53) / static_cast<std::uint64_t>(base)) {
            throw InvalidConfig("M^n exceeds 2^53 samples");
        }
        out *= static_cast<std::uint64_t>(base);
    }
    return out;
}

struct TimeRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

class Solver {
public:
    Solver(const BsdeProblem& p, const MlpConfig& c)
        : p_(p), c_(c), dim_(static_cast<std::size_t>(p.dim)), zero_z_(dim_, 0.0) {
        const auto ref = build_rule(c.quad_order, -1.0, 1.0);
        ref_nodes_ = ref.nodes;
        ref_weights_ = ref.weights;
    }

    Estimate zero(bool need_z) const {
        Estimate e;
        if (need_z) e.z = std::vector<double>(dim_, 0.0);
        return e;
    }

    TimeRule rule(double t) const {
        const long double len = static_cast<long double>(p_.horizon) - t;
        const long double mid = static_cast<long double>(p_.horizon) + t;
        TimeRule r;
        r.nodes.resize(ref_nodes_.size());
        r.weights.resize(ref_nodes_.size());
        for (std::size_t j = 0; j < ref_nodes_.size(); ++j) {
            r.nodes[j] = static_cast<double>((ref_nodes_[j] * len + mid) / 2.0L);
            r.weights[j] = static_cast<double>(ref_weights_[j] * len / 2.0L);
            require_gap(r.nodes[j] - t, "quadrature gap t_j - t");
        }
        return r;
    }

    std::vector<double> shifted(std::span<const double> x, const std::vector<double>& w) const {
        std::vector<double> out(dim_);
        for (std::size_t k = 0; k < dim_; ++k) out[k] = x[k] + w[k];
        return out;
    }

    double gen(double s, const Estimate& e) const {
        return p_.generator(s, e.y, e.z ? std::span<const double>(*e.z) : std::span<const double>(zero_z_));
    }

    // y_1: shared by both schemes.
    Estimate base(double t, std::span<const double> x, const StreamKey& key, bool need_z) const {
        const double h = p_.horizon - t;
        require_gap(h, "T - t");
        const auto r = rule(t);
        const int m = c_.base_samples;
        const int q = c_.quad_order;
        Estimate e = zero(need_z);

        RandomStream terminal(child_key(key, 1, 0, kTerminal));
        std::vector<double> w(dim_);
        const double phi_x = need_z ? p_.terminal(x) : 0.0;
        double sum = 0.0;
        for (int i = 0; i < m; ++i) {
            terminal.fill_normal(w, h);
            const double v = p_.terminal(shifted(x, w));
            sum += v;
            if (need_z)
                for (std::size_t k = 0; k < dim_; ++k) (*e.z)[k] += (v - phi_x) * w[k] / h;
        }
        e.cost.terminal_evals += static_cast<std::uint64_t>(m) + (need_z ? 1 : 0);
        e.cost.gaussian_draws += static_cast<std::uint64_t>(m) * dim_;

        std::vector<double> f(static_cast<std::size_t>(q));
        double gsum = 0.0;
        for (int j = 0; j < q; ++j) {
            f[j] = p_.generator(r.nodes[j], 0.0, zero_z_);
            gsum += r.weights[j] * f[j];
        }
        e.cost.generator_evals += static_cast<std::uint64_t>(q);
        e.y = sum / m + gsum;
        e.difference_term = gsum;

        if (need_z) {
            for (auto& v : *e.z) v /= m;
            std::vector<double> acc(dim_, 0.0);
            for (int i = 0; i < m; ++i) {
                RandomStream point(child_key(key, 0, i, kPoint));
                for (int j = 0; j < q; ++j) {
                    const double gap = r.nodes[j] - t;
                    point.fill_normal(w, gap);
                    for (std::size_t k = 0; k < dim_; ++k) acc[k] += r.weights[j] * f[j] * w[k] / gap;
                }
            }
            for (std::size_t k = 0; k < dim_; ++k) (*e.z)[k] += acc[k] / m;
            e.cost.gaussian_draws += static_cast<std::uint64_t>(m) * q * dim_;
        }
        return e;
    }

    Estimate modified(int n, double t, std::span<const double> x, const StreamKey& key, bool need_z,
                      Estimate* lower_out, int workers) const {
        if (n == 0) {
            if (lower_out) *lower_out = zero(need_z);
            return zero(need_z);
        }
        if (n == 1) {
            if (lower_out) *lower_out = zero(need_z);
            return base(t, x, key, need_z);
        }
        const double h = p_.horizon - t;
        require_gap(h, "T - t");
        const auto r = rule(t);
        const int m = c_.base_samples;
        const int q = c_.quad_order;
        const bool sub_z = p_.generator_uses_z;

        struct Sample {
            Estimate copy;
            std::vector<double> kernel;
            double diff = 0.0;  // sum_j w_j [f(y_{n-1}) - f(y_{n-2})]
            std::vector<double> zdiff;
            CostCounters cost;
        };
        std::vector<Sample> samples(static_cast<std::size_t>(m));

        detail::for_each_index(samples.size(), workers, [&](std::size_t i) {
            Sample& s = samples[i];
            const auto ii = static_cast<std::int64_t>(i);
            s.copy = modified(n - 1, t, x, copy_key(key, n, ii), need_z, nullptr, 1);
            s.cost += s.copy.cost;
            if (need_z && c_.strict_printed_form) {
                s.kernel.resize(dim_);
                RandomStream ks(child_key(key, n - 1, ii, kKernel));
                ks.fill_normal(s.kernel, h);
                s.cost.gaussian_draws += dim_;
            }
            if (need_z) s.zdiff.assign(dim_, 0.0);

            RandomStream point(child_key(key, n - 1, ii, kPoint));
            std::vector<double> w(dim_);
            for (int j = 0; j < q; ++j) {
                const double gap = r.nodes[j] - t;
                require_gap(gap, "quadrature gap t_j - t");
                point.fill_normal(w, gap);
                s.cost.gaussian_draws += dim_;
                const auto xs = shifted(x, w);
                const StreamKey eval = child_key(key, n - 1, ii * q + j, kEval);

                Estimate lower;
                Estimate upper;
                if (c_.reuse_cache) {
                    upper = modified(n - 1, r.nodes[j], xs, eval, sub_z, &lower, 1);
                    if (n - 2 >= 1) ++s.cost.cache_hits;
                } else {
                    upper = modified(n - 1, r.nodes[j], xs, eval, sub_z, nullptr, 1);
                    lower = modified(n - 2, r.nodes[j], xs, copy_key(eval, n - 1, 0), sub_z, nullptr, 1);
                    s.cost += lower.cost;
                }
                s.cost += upper.cost;
                const double delta = gen(r.nodes[j], upper) - gen(r.nodes[j], lower);
                s.cost.generator_evals += 2;
                s.diff += r.weights[j] * delta;
                if (need_z)
                    for (std::size_t k = 0; k < dim_; ++k) s.zdiff[k] += r.weights[j] * delta * w[k] / gap;
            }
        });

        Estimate e = zero(need_z);
        double lead = 0.0, copy_diff = 0.0, diff = 0.0;
        for (const auto& s : samples) {
            lead += s.copy.y;
            copy_diff += s.copy.difference_term;
            diff += s.diff;
            e.cost += s.cost;
            if (need_z) {
                for (std::size_t k = 0; k < dim_; ++k) {
                    const double zc = c_.strict_printed_form ? (*s.copy.z)[k] * s.kernel[k] / h : (*s.copy.z)[k];
                    (*e.z)[k] += zc + s.zdiff[k];
                }
            }
        }
        e.y = lead / m + diff / m;
        e.difference_term = copy_diff / m + diff / m;
        if (need_z)
            for (auto& v : *e.z) v /= m;
        if (lower_out) *lower_out = samples.front().copy;
        return e;
    }

    Estimate original(int n, double t, std::span<const double> x, const StreamKey& key, bool need_z,
                      int workers) const {
        if (n == 0) return zero(need_z);
        if (n == 1) return base(t, x, key, need_z);
        const double h = p_.horizon - t;
        require_gap(h, "T - t");
        const auto r = rule(t);
        const int q = c_.quad_order;
        const bool sub_z = p_.generator_uses_z;
        const std::uint64_t top = checked_power(c_.base_samples, n);
        Estimate e = zero(need_z);

        // Terminal term with M^n samples and the phi(x) control variate for z.
        RandomStream terminal(child_key(key, n, 0, kTerminal));
        std::vector<double> w(dim_);
        const double phi_x = need_z ? p_.terminal(x) : 0.0;
        double sum = 0.0;
        for (std::uint64_t i = 0; i < top; ++i) {
            terminal.fill_normal(w, h);
            const double v = p_.terminal(shifted(x, w));
            sum += v;
            if (need_z)
                for (std::size_t k = 0; k < dim_; ++k) (*e.z)[k] += (v - phi_x) * w[k] / h;
        }
        e.cost.terminal_evals += top + (need_z ? 1 : 0);
        e.cost.gaussian_draws += top * dim_;
        e.y = sum / static_cast<double>(top);
        if (need_z)
            for (auto& v : *e.z) v /= static_cast<double>(top);

        // l = 0: y_0 = 0 makes f(t_j, 0, 0) deterministic.
        std::vector<double> f0(static_cast<std::size_t>(q));
        double level0 = 0.0;
        for (int j = 0; j < q; ++j) {
            f0[j] = p_.generator(r.nodes[j], 0.0, zero_z_);
            level0 += r.weights[j] * f0[j];
        }
        e.cost.generator_evals += static_cast<std::uint64_t>(q);
        double diff_total = level0;
        if (need_z) {
            std::vector<double> acc(dim_, 0.0);
            for (std::uint64_t i = 0; i < top; ++i) {
                RandomStream point(child_key(key, 0, static_cast<std::int64_t>(i), kPoint));
                for (int j = 0; j < q; ++j) {
                    const double gap = r.nodes[j] - t;
                    point.fill_normal(w, gap);
                    for (std::size_t k = 0; k < dim_; ++k) acc[k] += r.weights[j] * f0[j] * w[k] / gap;
                }
            }
            for (std::size_t k = 0; k < dim_; ++k) (*e.z)[k] += acc[k] / static_cast<double>(top);
            e.cost.gaussian_draws += top * q * dim_;
        }

        for (int l = 1; l < n; ++l) {
            const std::uint64_t count = checked_power(c_.base_samples, n - l);
            struct Sample {
                double diff = 0.0;
                std::vector<double> zdiff;
                CostCounters cost;
            };
            std::vector<Sample> samples(count);
            detail::for_each_index(samples.size(), workers, [&](std::size_t i) {
                Sample& s = samples[i];
                const auto ii = static_cast<std::int64_t>(i);
                if (need_z) s.zdiff.assign(dim_, 0.0);
                RandomStream point(child_key(key, l, ii, kPoint));
                std::vector<double> wi(dim_);
                for (int j = 0; j < q; ++j) {
                    const double gap = r.nodes[j] - t;
                    require_gap(gap, "quadrature gap t_j - t");
                    point.fill_normal(wi, gap);
                    s.cost.gaussian_draws += dim_;
                    const auto xs = shifted(x, wi);
                    const auto upper =
                        original(l, r.nodes[j], xs, child_key(key, l, ii * q + j, kEval), sub_z, 1);
                    const auto lower =
                        original(l - 1, r.nodes[j], xs, child_key(key, l, ii * q + j, kEvalLower), sub_z, 1);
                    s.cost += upper.cost;
                    s.cost += lower.cost;
                    const double delta = gen(r.nodes[j], upper) - gen(r.nodes[j], lower);
                    s.cost.generator_evals += 2;
                    s.diff += r.weights[j] * delta;
                    if (need_z)
                        for (std::size_t k = 0; k < dim_; ++k) s.zdiff[k] += r.weights[j] * delta * wi[k] / gap;
                }
            });
            double level = 0.0;
            std::vector<double> zlevel(need_z ? dim_ : 0, 0.0);
            for (const auto& s : samples) {
                level += s.diff;
                e.cost += s.cost;
                for (std::size_t k = 0; k < zlevel.size(); ++k) zlevel[k] += s.zdiff[k];
            }
            diff_total += level / static_cast<double>(count);
            for (std::size_t k = 0; k < zlevel.size(); ++k) (*e.z)[k] += zlevel[k] / static_cast<double>(count);
        }
        e.y += diff_total;
        e.difference_term = diff_total;
        return e;
    }

private:
    const BsdeProblem& p_;
    const MlpConfig& c_;
    std::size_t dim_;
    std::vector<double> zero_z_;
    std::vector<long double> ref_nodes_;
    std::vector<long double> ref_weights_;
};

void check_query(const BsdeProblem& p, double t, std::span<const double> x) {
    if (!(t >= 0.0 && t < p.horizon)) {
        throw InvalidTime("query time must satisfy 0 <= t < T, got t = " + std::to_string(t));
    }
    if (x.size() != static_cast<std::size_t>(p.dim)) {
        throw InvalidConfig("query point has " + std::to_string(x.size()) + " components, problem dimension is " +
                            std::to_string(p.dim));
    }
}

void check_finite(const Estimate& e) {
    bool ok = std::isfinite(e.y);
    if (e.z)
        for (double v : *e.z) ok = ok && std::isfinite(v);
    if (!ok) throw NonFiniteValue("estimate is not finite");
}

} // namespace

const char* variant_name(Variant v) { return v == Variant::original ? "original" : "modified"; }

Variant parse_variant(std::string_view name) {
    if (name == "original") return Variant::original;
    if (name == "modified") return Variant::modified;
    throw InvalidConfig("unknown variant '" + std::string(name) + "'");
}

void check_config(const MlpConfig& c) {
    if (c.depth < 0 || c.depth > kMaxDepth) throw InvalidConfig("depth must lie in 0..10");
    if (c.base_samples < 1) throw InvalidConfig("base_samples must be >= 1");
    if (c.quad_order < 1 || c.quad_order > kMaxQuadratureOrder) throw InvalidConfig("quad_order must lie in 1..64");
    if (c.threads < 0) throw InvalidConfig("threads must be >= 0");
    if (c.variant == Variant::original) checked_power(c.base_samples, c.depth);
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

CostCounters& CostCounters::operator+=(const CostCounters& o) {
    generator_evals += o.generator_evals;
    terminal_evals += o.terminal_evals;
    gaussian_draws += o.gaussian_draws;
    cache_hits += o.cache_hits;
    return *this;
}

StreamKey copy_key(const StreamKey& key, int depth, std::int64_t copy) {
    return child_key(key, depth - 1, copy, kCopy);
}

Estimate estimate_at(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x,
                     const StreamKey& key) {
    check_problem(p);
    check_config(c);
    check_query(p, t, x);
    const Solver solver(p, c);
    const int workers = resolve_threads(c.threads);
    Estimate e = c.variant == Variant::original
                     ? solver.original(c.depth, t, x, key, c.estimate_z, workers)
                     : solver.modified(c.depth, t, x, key, c.estimate_z, nullptr, workers);
    check_finite(e);
    return e;
}

Estimate estimate(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x) {
    return estimate_at(p, c, t, x, StreamKey(c.seed));
}

Estimate estimate_original(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x) {
    MlpConfig o = c;
    o.variant = Variant::original;
    return estimate(p, o, t, x);
}

Estimate estimate_modified(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x) {
    MlpConfig o = c;
    o.variant = Variant::modified;
    return estimate(p, o, t, x);
}

PairedEstimate paired_recursion(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x,
                                int depth, const StreamKey& key) {
    if (depth < 1) throw InvalidConfig("paired recursion needs depth >= 1");
    MlpConfig o = c;
    o.variant = Variant::modified;
    o.depth = depth;
    check_problem(p);
    check_config(o);
    check_query(p, t, x);
    const Solver solver(p, o);
    PairedEstimate out;
    out.upper = solver.modified(depth, t, x, key, o.estimate_z, &out.lower, resolve_threads(o.threads));
    out.cost = out.upper.cost;
    check_finite(out.upper);
    return out;
}

PairedEstimate paired_recursion(const BsdeProblem& p, const MlpConfig& c, double t, std::span<const double> x,
                                int depth) {
    return paired_recursion(p, c, t, x, depth, StreamKey(c.seed));
}

std::uint64_t predicted_generator_evals(Variant variant, int depth, int m, int q, bool reuse_cache) {
    if (depth < 0 || m < 1 || q < 1) throw InvalidConfig("invalid cost query");
    const auto M = static_cast<std::uint64_t>(m);
    const auto Q = static_cast<std::uint64_t>(q);
    std::vector<std::uint64_t> g(static_cast<std::size_t>(depth) + 1, 0);
    if (depth >= 1) g[1] = Q;
    for (int n = 2; n <= depth; ++n) {
        if (variant == Variant::modified) {
            const std::uint64_t pair = reuse_cache ? g[n - 1] : g[n - 1] + g[n - 2];
            g[n] = M * g[n - 1] + Q * M * (pair + 2);
        } else {
            std::uint64_t total = Q;
            for (int l = 1; l < n; ++l) total += checked_power(m, n - l) * Q * (g[l] + g[l - 1] + 2);
            g[n] = total;
        }
    }
    return g[static_cast<std::size_t>(depth)];
}

} // namespace mlpbsde
