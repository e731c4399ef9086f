#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlpbsde {

using TerminalFn = std::function<double(std::span<const double> x)>;
using GeneratorFn = std::function<double(double t, double y, std::span<const double> z)>;

/// Closed-form u(t, x) solving the semilinear heat equation
///   u_t + (1/2) Laplacian(u) + f(t, u, grad u) = 0,  u(T, .) = phi,
/// together with its spatial gradient.
struct AnalyticSolution {
    std::function<double(double t, std::span<const double> x)> u;
    std::function<std::vector<double>(double t, std::span<const double> x)> grad_u;
};

/// Constants a problem may declare for the error analysis. All optional; the
/// bound evaluator refuses to run without the ones it needs.
struct DeclaredBounds {
    std::optional<double> lipschitz;       // C_f: |f(s,y1)-f(s,y2)| <= C_f |y1-y2|
    std::optional<double> generator_zero;  // C_0: |f(s,0)| <= C_0
    std::optional<double> terminal;        // C_phi: |phi| <= C_phi
    std::optional<double> solution;        // C_y: |y(t,x)| <= C_y
    std::optional<double> derivative;      // C_d: derivative bound of the expected generator
};

struct BsdeProblem {
    std::string name;
    int dim = 1;
    double horizon = 1.0;
    TerminalFn terminal;
    GeneratorFn generator;
    bool generator_uses_z = false;
    std::optional<AnalyticSolution> reference;
    DeclaredBounds bounds;
};

/// Overrides applied when instantiating builtin problems.
struct ProblemOptions {
    int dim = 1;
    double horizon = 1.0;
    double alpha = 0.3;
};

/// "zero-gen", "linear-y", "bounded-nonlinear" and "z-coupled".
std::vector<BsdeProblem> builtin_problems(const ProblemOptions& options = {});
std::vector<std::string> builtin_problem_names();
std::string describe_problem(std::string_view name);

/// Throws UnknownProblem for names outside builtin_problem_names().
BsdeProblem make_problem(std::string_view name, const ProblemOptions& options = {});

/// Throws InvalidConfig unless dim >= 1, horizon > 0 and both functions are set.
void check_problem(const BsdeProblem& problem);

enum class CheckStatus { checked, skipped };

struct AssumptionCheck {
    std::string constant;  // "C_f", "C_0", "C_phi", "C_y", "C_d"
    std::string description;
    CheckStatus status = CheckStatus::skipped;
    std::optional<double> declared;
    double max_observed = 0.0;   // largest probed value of the bounded quantity
    double max_violation = 0.0;  // max(0, observed excess over the declared bound)
    int probes = 0;
    std::string note;
};

struct AssumptionReport {
    std::string problem;
    std::vector<AssumptionCheck> checks;
    bool all_satisfied() const;
};

/// Probes every declared constant with `samples` random points. Undeclared
/// constants appear as skipped entries with a warning note. C_d is checked
/// through finite differences (orders 0..4) of the expected generator along
/// the solution, and only when an analytic solution exists.
AssumptionReport validate_assumptions(const BsdeProblem& problem, int samples,
                                      std::uint64_t seed = 1);

/// Excess |f(s,y1,z) - f(s,y2,z)| - C_f |y1 - y2| for one probe pair.
double lipschitz_violation(const BsdeProblem& problem, double lipschitz, double s, double y1,
                           double y2, std::span<const double> z);

struct ReferenceResiduals {
    double terminal_mismatch = 0.0;  // max |u(T,x) - phi(x)|
    double pde_residual = 0.0;       // max |u_t + Laplacian(u)/2 + f(t,u,grad u)|
    double gradient_mismatch = 0.0;  // max |grad_u - central differences of u|
};

/// Checks an analytic solution against its problem with central differences of
/// step `step` at `samples` random interior points. Throws if no reference.
ReferenceResiduals reference_residuals(const BsdeProblem& problem, int samples,
                                       double step = 1e-4, std::uint64_t seed = 1);

} // namespace mlpbsde
