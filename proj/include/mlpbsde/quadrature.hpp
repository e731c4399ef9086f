#pragma once

#include <functional>
#include <vector>

namespace mlpbsde {

inline constexpr int kMaxQuadratureOrder = 64;

/// Gauss-Legendre rule on [a, b]. Nodes are strictly increasing and interior,
/// weights are positive and sum to b - a. Nodes and weights are held in
/// extended precision; callers working in double round them once.
struct QuadratureRule {
    int order = 0;
    double a = 0.0;
    double b = 0.0;
    std::vector<long double> nodes;
    std::vector<long double> weights;

    /// The same rule affinely carried onto [lo, hi].
    QuadratureRule mapped(double lo, double hi) const;
};

/// Roots of the Legendre polynomial of degree q, ascending.
std::vector<double> legendre_roots(int q);

/// Value and derivative of the degree-q Legendre polynomial at x, by the
/// three-term recurrence.
struct LegendreValue {
    double value;
    double derivative;
};
LegendreValue legendre(int q, double x);

QuadratureRule build_rule(int q, double a, double b);

/// Sum of w_j g(t_j), accumulated in extended precision.
double integrate(const QuadratureRule& rule, const std::function<double(double)>& g);

/// As integrate(), with the integrand itself evaluated in extended precision.
long double integrate_extended(const QuadratureRule& rule,
                               const std::function<long double(long double)>& g);

/// Nodes u_m and weights v_m with sum_m v_m g(u_m) ~ E[g(W)], W ~ N(0, variance):
/// composite Gauss-Legendre (panels x order nodes) on [-8 sd, 8 sd] against the
/// Gaussian density. The truncated tail mass is below 1.3e-15.
struct GaussianRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussianRule gaussian_rule(double variance, int panels = 4, int order = 50);

/// Gauss-Legendre remainder bound
///   [q!]^4 (b-a)^{2q+1} / ((2q+1) [(2q)!]^3) * deriv_bound
/// where deriv_bound bounds |g^{(2q)}| on [a, b].
double quadrature_error_bound(int q, double a, double b, double deriv_bound);

} // namespace mlpbsde
