#include "mlpbsde/quadrature.hpp"

#include "mlpbsde/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mlpbsde {

namespace {

void check_order(int q) {
    if (q < 1 || q > kMaxQuadratureOrder) {
        throw InvalidOrder("quadrature order must lie in [1, " +
                           std::to_string(kMaxQuadratureOrder) + "], got " + std::to_string(q));
    }
}

template <typename Real>
void legendre_recurrence(int q, Real x, Real& value, Real& derivative) {
    Real p0 = 1;
    Real p1 = x;
    if (q == 0) {
        value = 1;
        derivative = 0;
        return;
    }
    for (int k = 2; k <= q; ++k) {
        const Real p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    value = p1;
    // (1 - x^2) L_q'(x) = q (L_{q-1}(x) - x L_q(x)); only used away from +-1.
    derivative = q * (p0 - x * p1) / (1 - x * x);
}

} // namespace

LegendreValue legendre(int q, double x) {
    double v = 0.0;
    double d = 0.0;
    legendre_recurrence<double>(q, x, v, d);
    return {v, d};
}

namespace {

std::vector<long double> legendre_roots_extended(int q) {
    check_order(q);
    std::vector<long double> roots(static_cast<std::size_t>(q));
    const int half = q / 2;
    for (int j = 1; j <= half; ++j) {
        // Chebyshev-type guess for the j-th largest root.
        long double x = std::cos(std::numbers::pi_v<long double> * (j - 0.25L) / (q + 0.5L));
        // Newton until |step| < 1e-15, plus one polishing step in extended precision.
        bool converged = false;
        for (int iter = 0; iter < 100; ++iter) {
            long double v = 0;
            long double d = 0;
            legendre_recurrence<long double>(q, x, v, d);
            const long double step = v / d;
            x -= step;
            if (converged) break;
            converged = std::fabs(step) < 1e-15L;
        }
        roots[static_cast<std::size_t>(q - j)] = x;
        roots[static_cast<std::size_t>(j - 1)] = -x;
    }
    if (q % 2 == 1) roots[static_cast<std::size_t>(half)] = 0.0L;
    return roots;
}

} // namespace

std::vector<double> legendre_roots(int q) {
    const auto extended = legendre_roots_extended(q);
    return {extended.begin(), extended.end()};
}

QuadratureRule build_rule(int q, double a, double b) {
    check_order(q);
    if (!(a < b)) {
        throw DegenerateInterval("quadrature interval requires a < b, got [" + std::to_string(a) +
                                 ", " + std::to_string(b) + "]");
    }
    const auto roots = legendre_roots_extended(q);
    QuadratureRule rule;
    rule.order = q;
    rule.a = -1.0;
    rule.b = 1.0;
    rule.nodes = roots;
    rule.weights.resize(roots.size());
    for (std::size_t j = 0; j < roots.size(); ++j) {
        long double v = 0;
        long double d = 0;
        const long double x = roots[j];
        legendre_recurrence<long double>(q, x, v, d);
        rule.weights[j] = 2.0L / ((1.0L - x * x) * d * d);
    }
    return rule.mapped(a, b);
}

QuadratureRule QuadratureRule::mapped(double lo, double hi) const {
    if (!(lo < hi)) {
        throw DegenerateInterval("quadrature interval requires a < b");
    }
    QuadratureRule out;
    out.order = order;
    out.a = lo;
    out.b = hi;
    out.nodes.resize(nodes.size());
    out.weights.resize(weights.size());
    const long double from = static_cast<long double>(b) - a;
    const long double to = static_cast<long double>(hi) - lo;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        // Reference coordinate c in [-1, 1], then t = (c (hi - lo) + (lo + hi)) / 2.
        const long double c = (2.0L * nodes[j] - (static_cast<long double>(a) + b)) / from;
        out.nodes[j] = (c * to + (static_cast<long double>(lo) + hi)) / 2.0L;
        out.weights[j] = weights[j] * to / from;
    }
    return out;
}

double integrate(const QuadratureRule& rule, const std::function<double(double)>& g) {
    long double sum = 0.0L;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double t = static_cast<double>(rule.nodes[j]);
        const double value = g(t);
        if (!std::isfinite(value)) {
            throw NonFiniteValue("integrand is not finite at t = " + std::to_string(t));
        }
        sum += rule.weights[j] * value;
    }
    return static_cast<double>(sum);
}

long double integrate_extended(const QuadratureRule& rule,
                               const std::function<long double(long double)>& g) {
    long double sum = 0.0L;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const long double value = g(rule.nodes[j]);
        if (!std::isfinite(value)) {
            throw NonFiniteValue("integrand is not finite at t = " +
                                 std::to_string(static_cast<double>(rule.nodes[j])));
        }
        sum += rule.weights[j] * value;
    }
    return sum;
}

GaussianRule gaussian_rule(double variance, int panels, int order) {
    if (!(variance > 0.0)) throw Error("Gaussian rule needs a positive variance");
    if (panels < 1) throw Error("Gaussian rule needs at least one panel");
    const double sd = std::sqrt(variance);
    const double half_width = 8.0 * sd;
    const double panel = 2.0 * half_width / panels;
    const auto reference = build_rule(order, -1.0, 1.0);
    const double norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
    GaussianRule out;
    out.nodes.reserve(static_cast<std::size_t>(panels * order));
    out.weights.reserve(static_cast<std::size_t>(panels * order));
    for (int p = 0; p < panels; ++p) {
        const double lo = -half_width + p * panel;
        const auto rule = reference.mapped(lo, lo + panel);
        for (int j = 0; j < order; ++j) {
            const double u = static_cast<double>(rule.nodes[j]);
            out.nodes.push_back(u);
            out.weights.push_back(static_cast<double>(rule.weights[j]) * norm *
                                  std::exp(-0.5 * u * u / variance));
        }
    }
    return out;
}

double quadrature_error_bound(int q, double a, double b, double deriv_bound) {
    check_order(q);
    if (!(a <= b)) throw DegenerateInterval("error bound requires a <= b");
    if (!(deriv_bound >= 0.0)) throw Error("derivative bound must be nonnegative");
    if (a == b || deriv_bound == 0.0) return 0.0;
    const double length = b - a;
    if (q <= 20) {
        double q_fact = 1.0;
        for (int k = 2; k <= q; ++k) q_fact *= k;
        double two_q_fact = 1.0;
        for (int k = 2; k <= 2 * q; ++k) two_q_fact *= k;
        const double q4 = q_fact * q_fact * q_fact * q_fact;
        const double t3 = two_q_fact * two_q_fact * two_q_fact;
        return q4 * std::pow(length, 2 * q + 1) / ((2 * q + 1) * t3) * deriv_bound;
    }
    const double log_bound = 4.0 * std::lgamma(q + 1.0) - 3.0 * std::lgamma(2.0 * q + 1.0) -
                             std::log(2.0 * q + 1.0) + (2.0 * q + 1.0) * std::log(length);
    return std::exp(log_bound) * deriv_bound;
}

} // namespace mlpbsde
