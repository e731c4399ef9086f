#pragma once

#include "mlpbsde/mlp.hpp"
#include "mlpbsde/problem.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlpbsde::cli {

inline constexpr int kSchemaVersion = 1;

// Exit statuses of the mlpbsde executable.
enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kBadConfig = 3,
    kUnknownProblem = 4,
    kUnwritableOutput = 5,
    kCellFailures = 6,
    kOracleUnavailable = 7,
    kInternal = 8,
};

struct ExperimentSpec {
    std::string problem = "zero-gen";
    ProblemOptions options;
    std::vector<Variant> variants{Variant::modified};
    std::vector<int> depths{1};
    std::vector<int> samples{16};
    std::vector<int> quad_orders{4};
    std::vector<bool> cache{true};
    double t = 0.0;
    std::vector<double> x{0.0};  // one value is broadcast to every coordinate
    int replications = 2;
    std::uint64_t seed = 1;
    bool estimate_z = false;
    bool strict_printed_form = false;
    bool theorem_bounds = true;
    std::optional<std::string> output;
    int threads = 1;  // execution only; 0 = hardware count
};

/// Reads the JSON config layout. Keys left out keep their defaults. Throws
/// InvalidConfig on a wrong schema_version, unknown keys or ill-typed values.
ExperimentSpec parse_spec(const nlohmann::json& doc);
/// As above, with the keys present in doc overriding base.
ExperimentSpec parse_spec(const nlohmann::json& doc, ExperimentSpec base);
nlohmann::json read_json_file(const std::string& path);
ExperimentSpec load_spec(const std::string& path);
nlohmann::json to_json(const ExperimentSpec& spec);

/// Throws UnknownProblem or InvalidConfig (empty grids, bad grid values,
/// x of the wrong length, t outside [0, T), replications < 1).
void validate_spec(const ExperimentSpec& spec);

/// Query point with a scalar x broadcast to the problem dimension.
std::vector<double> query_point(const ExperimentSpec& spec);

struct ResultRow {
    std::string variant;
    bool cache = true;
    int depth = 0;
    int samples = 0;
    int quad_order = 0;
    int replications = 0;
    std::string status;  // "ok" or "failed"
    std::optional<double> mean_y;
    std::optional<double> std_y;
    std::optional<double> abs_error;
    std::string bound_status;  // "ok", "not-applicable", "missing-bounds", "not-requested"
    std::optional<double> bias_bound;
    std::optional<double> variance_bound;
    std::optional<double> quadrature_term;
    std::optional<double> mc_term;
    std::optional<double> picard_term;
    std::optional<double> generator_evals;
    std::optional<double> terminal_evals;
    std::optional<double> gaussian_draws;
    std::optional<double> cache_hits;
    double wall_time = 0.0;  // seconds

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::string> failures;  // one message per failed cell
};

/// One row per (variant, cache, depth, M, Q) cell in that nesting order. The
/// original scheme has no cache switch and gets a single row per (depth, M, Q),
/// reported under the first cache value.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Fixed CSV column order.
const std::vector<std::string>& csv_columns();

/// Header plus one line per row; reals at 17 significant digits, absent values as NA.
std::string to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(std::string_view text);

nlohmann::json to_json(const ResultRow& row);
ResultRow row_from_json(const nlohmann::json& doc);

/// Sidecar document: schema version, resolved spec, seed, column order.
nlohmann::json sidecar(const ExperimentSpec& spec);

/// Full command-line entry point; returns the exit status.
int run_cli(int argc, char** argv);

} // namespace mlpbsde::cli
