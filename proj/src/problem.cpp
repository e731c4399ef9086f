#include "mlpbsde/problem.hpp"

#include "mlpbsde/errors.hpp"
#include "mlpbsde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mlpbsde {

namespace {

double coordinate_sum(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); }

TerminalFn cosine_of_sum() {
    return [](std::span<const double> x) { return std::cos(coordinate_sum(x)); };
}

// u(t,x) = exp(rate (T - t)) cos(sum x), the solution for f = alpha y with
// rate = alpha - d/2.
AnalyticSolution exponential_cosine(double horizon, double rate) {
    AnalyticSolution s;
    s.u = [=](double t, std::span<const double> x) {
        return std::exp(rate * (horizon - t)) * std::cos(coordinate_sum(x));
    };
    s.grad_u = [=](double t, std::span<const double> x) {
        const double g = -std::exp(rate * (horizon - t)) * std::sin(coordinate_sum(x));
        return std::vector<double>(x.size(), g);
    };
    return s;
}

BsdeProblem zero_generator(const ProblemOptions& o) {
    BsdeProblem p;
    p.name = "zero-gen";
    p.dim = o.dim;
    p.horizon = o.horizon;
    p.terminal = cosine_of_sum();
    p.generator = [](double, double, std::span<const double>) { return 0.0; };
    p.reference = exponential_cosine(o.horizon, -0.5 * o.dim);
    p.bounds.lipschitz = 0.0;
    p.bounds.generator_zero = 0.0;
    p.bounds.terminal = 1.0;
    p.bounds.solution = 1.0;
    p.bounds.derivative = 0.0;
    return p;
}

BsdeProblem linear_y(const ProblemOptions& o) {
    const double alpha = o.alpha;
    BsdeProblem p;
    p.name = "linear-y";
    p.dim = o.dim;
    p.horizon = o.horizon;
    p.terminal = cosine_of_sum();
    p.generator = [alpha](double, double y, std::span<const double>) { return alpha * y; };
    const double rate = alpha - 0.5 * o.dim;
    p.reference = exponential_cosine(o.horizon, rate);
    p.bounds.lipschitz = std::fabs(alpha);
    p.bounds.generator_zero = 0.0;
    p.bounds.terminal = 1.0;
    p.bounds.solution = std::max(1.0, std::exp(rate * o.horizon));
    // E f(s, y(s, x + W_{s-t})) = alpha exp(alpha (T-s) - d (T-t)/2) cos(sum x); its
    // s-derivatives carry powers of alpha, so they stay bounded only for |alpha| <= 1.
    if (std::fabs(alpha) <= 1.0) {
        p.bounds.derivative = std::fabs(alpha) * std::exp(std::max(alpha, 0.0) * o.horizon);
    }
    return p;
}

BsdeProblem bounded_nonlinear(const ProblemOptions& o) {
    BsdeProblem p;
    p.name = "bounded-nonlinear";
    p.dim = o.dim;
    p.horizon = o.horizon;
    p.terminal = cosine_of_sum();
    p.generator = [](double, double y, std::span<const double>) { return std::sin(y); };
    p.bounds.lipschitz = 1.0;
    p.bounds.generator_zero = 0.0;
    p.bounds.terminal = 1.0;
    p.bounds.solution = 1.0 + o.horizon;
    return p;
}

BsdeProblem z_coupled(const ProblemOptions& o) {
    BsdeProblem p;
    p.name = "z-coupled";
    p.dim = o.dim;
    p.horizon = o.horizon;
    p.terminal = cosine_of_sum();
    const double inv_dim = 1.0 / o.dim;
    p.generator = [inv_dim](double, double y, std::span<const double> z) {
        return std::sin(y) + std::cos(coordinate_sum(z)) * inv_dim;
    };
    p.generator_uses_z = true;
    p.bounds.lipschitz = 1.0;
    p.bounds.generator_zero = 1.0;
    p.bounds.terminal = 1.0;
    p.bounds.solution = 1.0 + 2.0 * o.horizon;
    return p;
}

struct Entry {
    const char* name;
    const char* description;
    BsdeProblem (*make)(const ProblemOptions&);
};

constexpr Entry kBuiltins[] = {
    {"zero-gen", "f = 0, phi = cos(sum x); u = exp(-d(T-t)/2) cos(sum x)", zero_generator},
    {"linear-y", "f = alpha y, phi = cos(sum x); u = exp((alpha-d/2)(T-t)) cos(sum x)", linear_y},
    {"bounded-nonlinear", "f = sin(y), phi = cos(sum x); no closed form", bounded_nonlinear},
    {"z-coupled", "f = sin(y) + cos(sum z)/d, phi = cos(sum x); depends on z", z_coupled},
};

// Central finite-difference derivatives of orders 0..4 at s with step h.
std::array<double, 5> derivatives(const std::function<double(double)>& g, double s, double h) {
    const double m2 = g(s - 2 * h), m1 = g(s - h), c = g(s), p1 = g(s + h), p2 = g(s + 2 * h);
    return {c,
            (p1 - m1) / (2 * h),
            (p1 - 2 * c + m1) / (h * h),
            (p2 - 2 * p1 + 2 * m1 - m2) / (2 * h * h * h),
            (p2 - 4 * p1 + 6 * c - 4 * m1 + m2) / (h * h * h * h)};
}

AssumptionCheck skipped(std::string constant, std::string description, std::string note) {
    AssumptionCheck c;
    c.constant = std::move(constant);
    c.description = std::move(description);
    c.status = CheckStatus::skipped;
    c.note = std::move(note);
    return c;
}

void record(AssumptionCheck& c, double observed, double excess) {
    c.max_observed = std::max(c.max_observed, observed);
    c.max_violation = std::max(c.max_violation, excess);
    ++c.probes;
}

} // namespace

std::vector<BsdeProblem> builtin_problems(const ProblemOptions& options) {
    std::vector<BsdeProblem> out;
    for (const auto& e : kBuiltins) out.push_back(make_problem(e.name, options));
    return out;
}

std::vector<std::string> builtin_problem_names() {
    std::vector<std::string> names;
    for (const auto& e : kBuiltins) names.emplace_back(e.name);
    return names;
}

std::string describe_problem(std::string_view name) {
    for (const auto& e : kBuiltins)
        if (name == e.name) return e.description;
    throw UnknownProblem("unknown problem '" + std::string(name) + "'");
}

BsdeProblem make_problem(std::string_view name, const ProblemOptions& options) {
    for (const auto& e : kBuiltins) {
        if (name == e.name) {
            auto p = e.make(options);
            check_problem(p);
            return p;
        }
    }
    throw UnknownProblem("unknown problem '" + std::string(name) + "'");
}

void check_problem(const BsdeProblem& p) {
    if (p.dim < 1) throw InvalidConfig("problem dimension must be >= 1");
    if (!(p.horizon > 0.0) || !std::isfinite(p.horizon))
        throw InvalidConfig("problem horizon must be positive and finite");
    if (!p.terminal || !p.generator) throw InvalidConfig("problem needs terminal and generator");
}

bool AssumptionReport::all_satisfied() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) {
        return c.status == CheckStatus::skipped || c.max_violation == 0.0;
    });
}

double lipschitz_violation(const BsdeProblem& p, double lipschitz, double s, double y1, double y2,
                           std::span<const double> z) {
    const double f1 = p.generator(s, y1, z);
    const double f2 = p.generator(s, y2, z);
    const double allowed = lipschitz * std::fabs(y1 - y2);
    // Excess below a few ulps of the operands is rounding, not a violation.
    const double rounding = 4.0 * std::numeric_limits<double>::epsilon() *
                            std::max({std::fabs(f1), std::fabs(f2), allowed});
    const double excess = std::fabs(f1 - f2) - allowed;
    return excess > rounding ? excess : 0.0;
}

AssumptionReport validate_assumptions(const BsdeProblem& p, int samples, std::uint64_t seed) {
    check_problem(p);
    if (samples < 1) throw InvalidConfig("validation needs at least one sample");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> wide(-10.0, 10.0);
    std::uniform_real_distribution<double> narrow(-3.0, 3.0);
    const auto d = static_cast<std::size_t>(p.dim);
    std::vector<double> x(d), z(d), zero(d, 0.0);

    AssumptionReport report;
    report.problem = p.name;
    const auto& b = p.bounds;

    if (b.lipschitz) {
        AssumptionCheck c{"C_f", "generator Lipschitz in y", CheckStatus::checked, b.lipschitz, 0.0, 0.0, 0, ""};
        for (int i = 0; i < samples; ++i) {
            const double s = p.horizon * unit(rng);
            const double y1 = wide(rng), y2 = wide(rng);
            for (auto& v : z) v = narrow(rng);
            const double gap = std::fabs(p.generator(s, y1, z) - p.generator(s, y2, z));
            const double dy = std::fabs(y1 - y2);
            record(c, dy > 0 ? gap / dy : 0.0, lipschitz_violation(p, *b.lipschitz, s, y1, y2, z));
        }
        report.checks.push_back(c);
    } else {
        report.checks.push_back(skipped("C_f", "generator Lipschitz in y", "warning: C_f not declared"));
    }

    if (b.generator_zero) {
        AssumptionCheck c{"C_0", "generator bounded at y = 0, z = 0", CheckStatus::checked, b.generator_zero, 0.0, 0.0, 0, ""};
        for (int i = 0; i < samples; ++i) {
            const double value = std::fabs(p.generator(p.horizon * unit(rng), 0.0, zero));
            record(c, value, std::max(0.0, value - *b.generator_zero));
        }
        report.checks.push_back(c);
    } else {
        report.checks.push_back(skipped("C_0", "generator bounded at y = 0, z = 0", "warning: C_0 not declared"));
    }

    if (b.terminal) {
        AssumptionCheck c{"C_phi", "terminal function bounded", CheckStatus::checked, b.terminal, 0.0, 0.0, 0, ""};
        for (int i = 0; i < samples; ++i) {
            for (auto& v : x) v = wide(rng);
            const double value = std::fabs(p.terminal(x));
            record(c, value, std::max(0.0, value - *b.terminal));
        }
        report.checks.push_back(c);
    } else {
        report.checks.push_back(skipped("C_phi", "terminal function bounded", "warning: C_phi not declared"));
    }

    if (!b.solution) {
        report.checks.push_back(skipped("C_y", "solution bounded", "warning: C_y not declared"));
    } else if (!p.reference) {
        report.checks.push_back(skipped("C_y", "solution bounded", "warning: no analytic solution to probe"));
    } else {
        AssumptionCheck c{"C_y", "solution bounded", CheckStatus::checked, b.solution, 0.0, 0.0, 0, ""};
        for (int i = 0; i < samples; ++i) {
            for (auto& v : x) v = wide(rng);
            const double value = std::fabs(p.reference->u(p.horizon * unit(rng), x));
            record(c, value, std::max(0.0, value - *b.solution));
        }
        report.checks.push_back(c);
    }

    const char* cd_text = "expected generator along the solution has bounded derivatives (orders 0-4)";
    if (!b.derivative) {
        report.checks.push_back(skipped("C_d", cd_text, "warning: C_d not declared"));
    } else if (!p.reference) {
        report.checks.push_back(skipped("C_d", cd_text, "warning: no analytic solution to probe"));
    } else {
        AssumptionCheck c{"C_d", cd_text, CheckStatus::checked, b.derivative, 0.0, 0.0, 0, ""};
        c.note = "finite differences up to order 4 only";
        // Common random numbers keep the Monte-Carlo expectation smooth in s; in
        // one dimension the expectation is taken by quadrature instead.
        std::vector<double> normals;
        std::vector<double> probe_weights;
        if (p.dim == 1) {
            const auto g = gaussian_rule(1.0);
            normals = g.nodes;
            probe_weights = g.weights;
        } else {
            std::normal_distribution<double> gauss;
            const std::size_t pairs = 2048;
            for (std::size_t k = 0; k < pairs * d; ++k) normals.push_back(gauss(rng));
            for (std::size_t k = 0; k < pairs; ++k)
                for (std::size_t i = 0; i < d; ++i) normals.push_back(-normals[k * d + i]);
            probe_weights.assign(2 * pairs, 1.0 / (2 * pairs));
        }
        const std::size_t points = probe_weights.size();
        std::vector<double> xs(d);
        // component k = 0 is F_t, k >= 1 the k-th component of G_t.
        auto expected = [&](double t, std::span<const double> x0, double s, std::size_t k) {
            const double scale = std::sqrt(s - t);
            double acc = 0.0;
            for (std::size_t m = 0; m < points; ++m) {
                const double* zeta = &normals[m * d];
                for (std::size_t i = 0; i < d; ++i) xs[i] = x0[i] + scale * zeta[i];
                const double u = p.reference->u(s, xs);
                const auto grad = p.reference->grad_u(s, xs);
                double value = p.generator(s, u, grad);
                if (k > 0) value *= zeta[k - 1] / scale;
                acc += probe_weights[m] * value;
            }
            return acc;
        };
        const int probes = std::min(samples, 16);
        for (int i = 0; i < probes; ++i) {
            const double t = 0.5 * p.horizon * unit(rng);
            std::vector<double> x0(d);
            for (auto& v : x0) v = narrow(rng);
            const double h = (p.horizon - t) / 64.0;
            for (int g = 0; g < 8; ++g) {
                const double s = t + (p.horizon - t) * (0.25 + 0.6 * g / 7.0);
                for (std::size_t k = 0; k <= std::min<std::size_t>(d, 1); ++k) {
                    const auto ders = derivatives(
                        [&](double ss) { return expected(t, x0, ss, k); }, s, h);
                    for (double v : ders) record(c, std::fabs(v), std::max(0.0, std::fabs(v) - *b.derivative));
                }
            }
        }
        report.checks.push_back(c);
    }
    return report;
}

ReferenceResiduals reference_residuals(const BsdeProblem& p, int samples, double step,
                                       std::uint64_t seed) {
    check_problem(p);
    if (!p.reference) throw Error("problem '" + p.name + "' has no analytic solution");
    const auto& ref = *p.reference;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> space(-3.0, 3.0);
    const auto d = static_cast<std::size_t>(p.dim);
    std::vector<double> x(d), shifted(d);
    ReferenceResiduals out;
    for (int i = 0; i < samples; ++i) {
        for (auto& v : x) v = space(rng);
        out.terminal_mismatch =
            std::max(out.terminal_mismatch, std::fabs(ref.u(p.horizon, x) - p.terminal(x)));

        const double t = step + (p.horizon - 2 * step) * unit(rng);
        for (auto& v : x) v = space(rng);
        const double u = ref.u(t, x);
        const double u_t = (ref.u(t + step, x) - ref.u(t - step, x)) / (2 * step);
        const auto grad = ref.grad_u(t, x);
        double laplacian = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            shifted = x;
            shifted[k] = x[k] + step;
            const double up = ref.u(t, shifted);
            shifted[k] = x[k] - step;
            const double down = ref.u(t, shifted);
            laplacian += (up - 2 * u + down) / (step * step);
            out.gradient_mismatch =
                std::max(out.gradient_mismatch, std::fabs((up - down) / (2 * step) - grad[k]));
        }
        const double residual = u_t + 0.5 * laplacian + p.generator(t, u, grad);
        out.pde_residual = std::max(out.pde_residual, std::fabs(residual));
    }
    return out;
}

} // namespace mlpbsde
