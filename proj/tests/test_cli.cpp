#include "experiment.hpp"

#include "mlpbsde/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlpbsde;
using namespace mlpbsde::cli;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mlpbsde_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "mlpbsde");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

ExperimentSpec small_spec() {
    ExperimentSpec s;
    s.problem = "linear-y";
    s.variants = {Variant::original, Variant::modified};
    s.depths = {1, 2};
    s.samples = {3};
    s.quad_orders = {2};
    s.cache = {true, false};
    s.replications = 5;
    s.seed = 17;
    return s;
}

} // namespace

TEST_CASE("config parsing") {
    const auto s = parse_spec(json::parse(R"({
        "schema_version": 1,
        "problem": {"name": "linear-y", "dim": 3, "alpha": 0.2},
        "variants": ["original", "modified"],
        "depth": [1, 2], "samples": 4, "quad_order": [2],
        "cache": [true, false],
        "query": {"t": 0.25, "x": 0.5},
        "replications": 10, "seed": 18446744073709551615
    })"));
    CHECK(s.problem == "linear-y");
    CHECK(s.options.dim == 3);
    CHECK(s.options.alpha == 0.2);
    CHECK(s.variants == std::vector<Variant>{Variant::original, Variant::modified});
    CHECK(s.samples == std::vector<int>{4});
    CHECK(s.seed == 18446744073709551615ull);
    CHECK(query_point(s) == std::vector<double>(3, 0.5));
    validate_spec(s);

    CHECK(parse_spec(to_json(s)).seed == s.seed);
    CHECK(to_json(parse_spec(to_json(s))) == to_json(s));

    CHECK_THROWS_AS(parse_spec(json::parse(R"({"problem": "zero-gen"})")), InvalidConfig);
    CHECK_THROWS_AS(parse_spec(json::parse(R"({"schema_version": 2})")), InvalidConfig);
    CHECK_THROWS_AS(parse_spec(json::parse(R"({"schema_version": 1, "depths": [1]})")), InvalidConfig);
    CHECK_THROWS_AS(parse_spec(json::parse(R"({"schema_version": 1, "depth": "deep"})")), InvalidConfig);
    CHECK_THROWS_AS(parse_spec(json::parse(R"({"schema_version": 1, "seed": -1})")), InvalidConfig);

    auto bad = s;
    bad.depths = {};
    CHECK_THROWS_AS(validate_spec(bad), InvalidConfig);
    bad = s;
    bad.depths = {11};
    CHECK_THROWS_AS(validate_spec(bad), InvalidConfig);
    bad = s;
    bad.x = {0.0, 0.0};
    CHECK_THROWS_AS(validate_spec(bad), InvalidConfig);
    bad = s;
    bad.problem = "heat";
    CHECK_THROWS_AS(validate_spec(bad), UnknownProblem);
}

TEST_CASE("grid expansion and row contents") {
    const auto r = run_experiment(small_spec());
    // original: one cache row per depth; modified: two.
    REQUIRE(r.rows.size() == 6);
    CHECK(r.failures.empty());
    CHECK(r.rows[0].variant == "original");
    CHECK(r.rows[2].variant == "modified");
    CHECK(r.rows[2].cache);
    CHECK_FALSE(r.rows[4].cache);
    for (const auto& row : r.rows) {
        CHECK(row.status == "ok");
        CHECK(row.abs_error.has_value());
        CHECK(row.std_y.has_value());
    }
    CHECK(r.rows[0].bound_status == "not-applicable");
    CHECK(r.rows[2].bound_status == "ok");
    CHECK(*r.rows[2].bias_bound ==
          *r.rows[2].quadrature_term + *r.rows[2].mc_term + *r.rows[2].picard_term);
    // Cache switch leaves the values alone.
    CHECK(r.rows[3].mean_y == r.rows[5].mean_y);
    CHECK(r.rows[3].std_y == r.rows[5].std_y);
}

TEST_CASE("z-coupled rows carry the not-applicable marker") {
    ExperimentSpec s;
    s.problem = "z-coupled";
    s.options.dim = 2;
    s.depths = {2};
    s.samples = {2};
    s.quad_orders = {2};
    const auto r = run_experiment(s);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].status == "ok");
    CHECK(r.rows[0].bound_status == "not-applicable");
    CHECK_FALSE(r.rows[0].bias_bound.has_value());
    CHECK_FALSE(r.rows[0].abs_error.has_value());
    CHECK(to_csv(r.rows).find("not-applicable") != std::string::npos);
}

TEST_CASE("schemes agree at depth one") {
    ExperimentSpec s;
    s.problem = "zero-gen";
    s.variants = {Variant::original, Variant::modified};
    s.samples = {10'000};
    s.quad_orders = {2};
    s.replications = 1;
    const auto r = run_experiment(s);
    REQUIRE(r.rows.size() == 2);
    const double sd = std::sqrt(0.5 * (1.0 + std::exp(-2.0)) - std::exp(-1.0)) / 100.0;
    CHECK(std::fabs(*r.rows[0].mean_y - *r.rows[1].mean_y) <= 4.0 * sd);
}

TEST_CASE("results round-trip through CSV and JSON") {
    auto rows = run_experiment(small_spec()).rows;
    ResultRow odd;
    odd.variant = "modified";
    odd.status = "failed";
    odd.bound_status = "not-requested";
    odd.mean_y = 1.0 / 3.0;
    odd.bias_bound = INFINITY;
    odd.wall_time = 0.1;
    rows.push_back(odd);

    const auto text = to_csv(rows);
    CHECK(parse_csv(text) == rows);
    CHECK(to_csv(parse_csv(text)) == text);
    for (const auto& row : rows) CHECK(row_from_json(json::parse(to_json(row).dump())) == row);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2\n"), InvalidConfig);
}

TEST_CASE("command line files, sidecar and exit codes") {
    const auto config = scratch("spec.json");
    const auto out = scratch("out.csv");
    std::filesystem::remove(out);
    std::filesystem::remove(out.string() + ".json");
    write_file(config, to_json(small_spec()).dump());

    CHECK(run({"sweep", "--config", config.string(), "--out", out.string()}) == kOk);
    const auto rows = parse_csv(read_file(out));
    CHECK(rows.size() == 6);
    const auto side = json::parse(read_file(out.string() + ".json"));
    CHECK(side["schema_version"] == kSchemaVersion);
    CHECK(side["seed"] == 17);
    CHECK(side["columns"].get<std::vector<std::string>>() == csv_columns());
    CHECK(parse_spec(side["spec"]).depths == std::vector<int>{1, 2});

    // The config's seed beats the flag; the flag's output path beats the config's.
    auto with_output = small_spec();
    with_output.output = scratch("ignored.csv").string();
    write_file(config, to_json(with_output).dump());
    const auto flagged = scratch("flagged.csv");
    CHECK(run({"sweep", "--config", config.string(), "--seed", "99", "--out", flagged.string()}) == kOk);
    const auto again = parse_csv(read_file(flagged));
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].mean_y == rows[i].mean_y);

    const auto json_out = scratch("out.json");
    CHECK(run({"solve", "--problem", "zero-gen", "--samples", "50", "--format", "json", "--out", json_out.string()}) ==
          kOk);
    CHECK(json::parse(read_file(json_out))["rows"].size() == 1);

    CHECK(run({"solve", "--problem", "heat"}) == kUnknownProblem);
    CHECK(run({"sweep", "--config", scratch("missing.json").string()}) == kBadConfig);
    write_file(scratch("broken.json"), "{\"schema_version\": 1, \"depth\": [");
    CHECK(run({"sweep", "--config", scratch("broken.json").string()}) == kBadConfig);
    write_file(scratch("grid.json"), R"({"schema_version": 1, "depth": []})");
    CHECK(run({"sweep", "--config", scratch("grid.json").string()}) == kBadConfig);
    CHECK(run({"sweep", "--config", config.string(), "--out", "/nonexistent-dir/x.csv"}) == kUnwritableOutput);
    CHECK(run({"solve", "--threads", "lots"}) == kBadConfig);
    CHECK(run({"solve", "--depth", "1", "--config", config.string()}) == kBadConfig);  // grid in solve
    CHECK(run({"oracle", "--problem", "z-coupled", "--depth", "2"}) == kOracleUnavailable);
    CHECK(run({"frobnicate"}) == kUsage);
    CHECK(run({"list-problems"}) == kOk);

    const auto report = scratch("report.json");
    CHECK(run({"validate", "--problem", "linear-y", "--probes", "50", "--out", report.string()}) == kOk);
    CHECK(json::parse(read_file(report))["all_satisfied"] == true);

    const auto oracle = scratch("oracle.json");
    CHECK(run({"oracle", "--problem", "zero-gen", "--depth", "2", "--quad-order", "3", "--out", oracle.string()}) ==
          kOk);
    CHECK(std::fabs(json::parse(read_file(oracle))["value"].get<double>() - std::exp(-0.5)) < 1e-8);
}

TEST_CASE("failed cells are reported and the run continues") {
    // Passes validation, then fails inside the cell: the quadrature gaps t_j - t vanish.
    ExperimentSpec s;
    s.problem = "zero-gen";
    s.depths = {1};
    s.samples = {2};
    s.quad_orders = {2};
    s.t = 1.0 - 1e-13;
    const auto r = run_experiment(s);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].status == "failed");
    CHECK(r.failures.size() == 1);
    CHECK_FALSE(r.rows[0].mean_y.has_value());

    const auto config = scratch("failing.json");
    write_file(config, to_json(s).dump());
    CHECK(run({"sweep", "--config", config.string(), "--out", scratch("failing.csv").string()}) == kCellFailures);
    CHECK(parse_csv(read_file(scratch("failing.csv"))).size() == 1);
}

TEST_CASE("thread count does not change numeric columns") {
    auto s = small_spec();
    s.threads = 1;
    auto a = run_experiment(s).rows;
    s.threads = 0;
    auto b = run_experiment(s).rows;
    s.threads = 4;
    auto c = run_experiment(s).rows;
    for (auto* rows : {&a, &b, &c})
        for (auto& row : *rows) row.wall_time = 0.0;
    CHECK(to_csv(a) == to_csv(b));
    CHECK(to_csv(a) == to_csv(c));
}
