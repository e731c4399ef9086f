#include "experiment.hpp"

#include "mlpbsde/analysis.hpp"
#include "mlpbsde/errors.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mlpbsde::cli {

using nlohmann::json;

namespace {

struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::set<std::string> kSpecKeys{
    "schema_version", "problem", "variants", "depth", "samples", "quad_order", "cache", "query",
    "replications", "seed", "estimate_z", "strict_printed_form", "theorem_bounds", "output", "threads"};

template <class T>
T get_as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw InvalidConfig("config key '" + key + "': " + e.what());
    }
}

// A grid may be given as a single value or a list.
template <class T>
std::vector<T> grid(const json& v, const std::string& key) {
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(get_as<T>(e, key));
    } else {
        out.push_back(get_as<T>(v, key));
    }
    return out;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

std::optional<double> parse_optional(const std::string& s) {
    if (s == "NA") return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw InvalidConfig("not a number in results: '" + s + "'");
    return v;
}

json real_json(double v) {
    if (std::isfinite(v)) return v;
    return format_real(v);
}

json optional_json(const std::optional<double>& v) { return v ? real_json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& v) {
    if (v.is_null()) return std::nullopt;
    if (v.is_string()) return parse_optional(v.get<std::string>());
    return v.get<double>();
}

bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw InvalidConfig("not a boolean in results: '" + s + "'");
}

struct Cell {
    Variant variant;
    bool cache;
    int depth;
    int samples;
    int quad_order;
};

std::vector<Cell> cells(const ExperimentSpec& s) {
    std::vector<Cell> out;
    for (Variant v : s.variants) {
        const std::size_t cache_count = v == Variant::original ? 1 : s.cache.size();
        for (std::size_t c = 0; c < cache_count; ++c)
            for (int n : s.depths)
                for (int m : s.samples)
                    for (int q : s.quad_orders) out.push_back({v, static_cast<bool>(s.cache[c]), n, m, q});
    }
    return out;
}

MlpConfig cell_config(const ExperimentSpec& s, const Cell& c) {
    MlpConfig cfg;
    cfg.variant = c.variant;
    cfg.depth = c.depth;
    cfg.base_samples = c.samples;
    cfg.quad_order = c.quad_order;
    cfg.seed = s.seed;
    cfg.estimate_z = s.estimate_z;
    cfg.reuse_cache = c.cache;
    cfg.strict_printed_form = s.strict_printed_form;
    cfg.threads = s.threads;
    return cfg;
}

void fill_bounds(ResultRow& row, const ExperimentSpec& s, const BsdeProblem& p, const MlpConfig& cfg) {
    if (!s.theorem_bounds) {
        row.bound_status = "not-requested";
        return;
    }
    try {
        const auto b = theorem_bound(p, cfg, s.t);
        row.bound_status = "ok";
        row.bias_bound = b.bias_bound;
        row.variance_bound = b.variance_bound;
        row.quadrature_term = b.quadrature_term;
        row.mc_term = b.mc_term;
        row.picard_term = b.picard_term;
    } catch (const TheoremNotApplicable&) {
        row.bound_status = "not-applicable";
    } catch (const MissingBounds&) {
        row.bound_status = "missing-bounds";
    }
}

} // namespace

ExperimentSpec parse_spec(const json& doc, ExperimentSpec s) {
    if (!doc.is_object()) throw InvalidConfig("config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!kSpecKeys.count(key)) throw InvalidConfig("unknown config key '" + key + "'");
    }
    if (!doc.contains("schema_version")) throw InvalidConfig("config lacks schema_version");
    if (get_as<int>(doc["schema_version"], "schema_version") != kSchemaVersion) {
        throw InvalidConfig("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
    }
    if (doc.contains("problem")) {
        const auto& p = doc["problem"];
        if (p.is_string()) {
            s.problem = p.get<std::string>();
        } else if (p.is_object()) {
            for (const auto& [key, value] : p.items()) {
                if (key == "name") s.problem = get_as<std::string>(value, "problem.name");
                else if (key == "dim") s.options.dim = get_as<int>(value, "problem.dim");
                else if (key == "horizon") s.options.horizon = get_as<double>(value, "problem.horizon");
                else if (key == "alpha") s.options.alpha = get_as<double>(value, "problem.alpha");
                else throw InvalidConfig("unknown config key 'problem." + key + "'");
            }
        } else {
            throw InvalidConfig("config key 'problem' must be a name or an object");
        }
    }
    if (doc.contains("variants")) {
        s.variants.clear();
        for (const auto& name : grid<std::string>(doc["variants"], "variants")) s.variants.push_back(parse_variant(name));
    }
    if (doc.contains("depth")) s.depths = grid<int>(doc["depth"], "depth");
    if (doc.contains("samples")) s.samples = grid<int>(doc["samples"], "samples");
    if (doc.contains("quad_order")) s.quad_orders = grid<int>(doc["quad_order"], "quad_order");
    if (doc.contains("cache")) s.cache = grid<bool>(doc["cache"], "cache");
    if (doc.contains("query")) {
        const auto& q = doc["query"];
        if (!q.is_object()) throw InvalidConfig("config key 'query' must be an object");
        for (const auto& [key, value] : q.items()) {
            if (key == "t") s.t = get_as<double>(value, "query.t");
            else if (key == "x") s.x = grid<double>(value, "query.x");
            else throw InvalidConfig("unknown config key 'query." + key + "'");
        }
    }
    if (doc.contains("replications")) s.replications = get_as<int>(doc["replications"], "replications");
    if (doc.contains("seed")) {
        const auto& v = doc["seed"];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            throw InvalidConfig("config key 'seed' must be an unsigned 64-bit integer");
        }
        s.seed = v.get<std::uint64_t>();
    }
    if (doc.contains("estimate_z")) s.estimate_z = get_as<bool>(doc["estimate_z"], "estimate_z");
    if (doc.contains("strict_printed_form"))
        s.strict_printed_form = get_as<bool>(doc["strict_printed_form"], "strict_printed_form");
    if (doc.contains("theorem_bounds")) s.theorem_bounds = get_as<bool>(doc["theorem_bounds"], "theorem_bounds");
    if (doc.contains("output")) s.output = get_as<std::string>(doc["output"], "output");
    if (doc.contains("threads")) s.threads = get_as<int>(doc["threads"], "threads");
    return s;
}

ExperimentSpec parse_spec(const json& doc) { return parse_spec(doc, ExperimentSpec{}); }

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidConfig("config '" + path + "' is not valid JSON: " + e.what());
    }
}

ExperimentSpec load_spec(const std::string& path) { return parse_spec(read_json_file(path)); }

json to_json(const ExperimentSpec& s) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["problem"] = {{"name", s.problem},
                      {"dim", s.options.dim},
                      {"horizon", s.options.horizon},
                      {"alpha", s.options.alpha}};
    json variants = json::array();
    for (Variant v : s.variants) variants.push_back(variant_name(v));
    doc["variants"] = variants;
    doc["depth"] = s.depths;
    doc["samples"] = s.samples;
    doc["quad_order"] = s.quad_orders;
    doc["cache"] = s.cache;
    doc["query"] = {{"t", s.t}, {"x", s.x}};
    doc["replications"] = s.replications;
    doc["seed"] = s.seed;
    doc["estimate_z"] = s.estimate_z;
    doc["strict_printed_form"] = s.strict_printed_form;
    doc["theorem_bounds"] = s.theorem_bounds;
    if (s.output) doc["output"] = *s.output;
    return doc;
}

void validate_spec(const ExperimentSpec& s) {
    const auto p = make_problem(s.problem, s.options);
    if (s.variants.empty() || s.depths.empty() || s.samples.empty() || s.quad_orders.empty() || s.cache.empty()) {
        throw InvalidConfig("every grid needs at least one value");
    }
    if (s.replications < 1) throw InvalidConfig("replications must be >= 1");
    if (s.threads < 0) throw InvalidConfig("threads must be >= 0");
    if (!(s.t >= 0.0 && s.t < p.horizon)) throw InvalidConfig("query t must satisfy 0 <= t < T");
    if (s.x.size() != 1 && s.x.size() != static_cast<std::size_t>(p.dim)) {
        throw InvalidConfig("query x needs 1 or " + std::to_string(p.dim) + " values");
    }
    for (const auto& c : cells(s)) check_config(cell_config(s, c));
}

std::vector<double> query_point(const ExperimentSpec& s) {
    if (s.x.size() == 1) return std::vector<double>(static_cast<std::size_t>(s.options.dim), s.x.front());
    return s.x;
}

ExperimentResult run_experiment(const ExperimentSpec& s) {
    validate_spec(s);
    const auto p = make_problem(s.problem, s.options);
    const auto x = query_point(s);
    ExperimentResult out;
    for (const auto& c : cells(s)) {
        const MlpConfig cfg = cell_config(s, c);
        ResultRow row;
        row.variant = variant_name(c.variant);
        row.cache = c.cache;
        row.depth = c.depth;
        row.samples = c.samples;
        row.quad_order = c.quad_order;
        row.replications = s.replications;
        const auto start = std::chrono::steady_clock::now();
        try {
            if (s.replications == 1) {
                MlpConfig one = cfg;
                one.seed = derive_seed(s.seed, 0);
                const auto e = estimate(p, one, s.t, x);
                row.mean_y = e.y;
                if (p.reference) row.abs_error = std::fabs(e.y - p.reference->u(s.t, x));
                row.generator_evals = static_cast<double>(e.cost.generator_evals);
                row.terminal_evals = static_cast<double>(e.cost.terminal_evals);
                row.gaussian_draws = static_cast<double>(e.cost.gaussian_draws);
                row.cache_hits = static_cast<double>(e.cost.cache_hits);
            } else {
                const auto r = run_replications(p, cfg, s.t, x, s.replications);
                row.mean_y = r.mean_y;
                row.std_y = r.std_y;
                row.abs_error = r.abs_error;
                row.generator_evals = r.mean_cost.generator_evals;
                row.terminal_evals = r.mean_cost.terminal_evals;
                row.gaussian_draws = r.mean_cost.gaussian_draws;
                row.cache_hits = r.mean_cost.cache_hits;
            }
            fill_bounds(row, s, p, cfg);
            row.status = "ok";
        } catch (const Error& e) {
            ResultRow failed;
            failed.variant = row.variant;
            failed.cache = row.cache;
            failed.depth = row.depth;
            failed.samples = row.samples;
            failed.quad_order = row.quad_order;
            failed.replications = row.replications;
            row = std::move(failed);
            row.status = "failed";
            row.bound_status = "not-requested";
            out.failures.push_back(std::string("cell variant=") + row.variant + " cache=" +
                                   (row.cache ? "true" : "false") + " depth=" + std::to_string(row.depth) +
                                   " M=" + std::to_string(row.samples) + " Q=" + std::to_string(row.quad_order) +
                                   ": " + e.what());
        }
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.rows.push_back(std::move(row));
    }
    return out;
}

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> columns{
        "variant",     "cache",          "depth",          "samples",         "quad_order",
        "replications", "status",        "mean_y",         "std_y",           "abs_error",
        "bound_status", "bias_bound",    "variance_bound", "quadrature_term", "mc_term",
        "picard_term", "generator_evals", "terminal_evals", "gaussian_draws",  "cache_hits",
        "wall_time"};
    return columns;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    const auto& cols = csv_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << '\n';
    for (const auto& r : rows) {
        os << r.variant << ',' << (r.cache ? "true" : "false") << ',' << r.depth << ',' << r.samples << ','
           << r.quad_order << ',' << r.replications << ',' << r.status << ',' << format_optional(r.mean_y) << ','
           << format_optional(r.std_y) << ',' << format_optional(r.abs_error) << ',' << r.bound_status << ','
           << format_optional(r.bias_bound) << ',' << format_optional(r.variance_bound) << ','
           << format_optional(r.quadrature_term) << ',' << format_optional(r.mc_term) << ','
           << format_optional(r.picard_term) << ',' << format_optional(r.generator_evals) << ','
           << format_optional(r.terminal_evals) << ',' << format_optional(r.gaussian_draws) << ','
           << format_optional(r.cache_hits) << ',' << format_real(r.wall_time) << '\n';
    }
    return os.str();
}

std::vector<ResultRow> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> lines;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        lines.push_back(std::move(fields));
    }
    if (lines.empty() || lines.front() != csv_columns()) throw InvalidConfig("results header does not match");
    std::vector<ResultRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& f = lines[i];
        if (f.size() != csv_columns().size()) throw InvalidConfig("results line " + std::to_string(i) + " is short");
        ResultRow r;
        r.variant = f[0];
        r.cache = parse_bool(f[1]);
        r.depth = std::stoi(f[2]);
        r.samples = std::stoi(f[3]);
        r.quad_order = std::stoi(f[4]);
        r.replications = std::stoi(f[5]);
        r.status = f[6];
        r.mean_y = parse_optional(f[7]);
        r.std_y = parse_optional(f[8]);
        r.abs_error = parse_optional(f[9]);
        r.bound_status = f[10];
        r.bias_bound = parse_optional(f[11]);
        r.variance_bound = parse_optional(f[12]);
        r.quadrature_term = parse_optional(f[13]);
        r.mc_term = parse_optional(f[14]);
        r.picard_term = parse_optional(f[15]);
        r.generator_evals = parse_optional(f[16]);
        r.terminal_evals = parse_optional(f[17]);
        r.gaussian_draws = parse_optional(f[18]);
        r.cache_hits = parse_optional(f[19]);
        r.wall_time = *parse_optional(f[20]);
        rows.push_back(std::move(r));
    }
    return rows;
}

json to_json(const ResultRow& r) {
    return json{{"variant", r.variant},
                {"cache", r.cache},
                {"depth", r.depth},
                {"samples", r.samples},
                {"quad_order", r.quad_order},
                {"replications", r.replications},
                {"status", r.status},
                {"mean_y", optional_json(r.mean_y)},
                {"std_y", optional_json(r.std_y)},
                {"abs_error", optional_json(r.abs_error)},
                {"bound_status", r.bound_status},
                {"bias_bound", optional_json(r.bias_bound)},
                {"variance_bound", optional_json(r.variance_bound)},
                {"quadrature_term", optional_json(r.quadrature_term)},
                {"mc_term", optional_json(r.mc_term)},
                {"picard_term", optional_json(r.picard_term)},
                {"generator_evals", optional_json(r.generator_evals)},
                {"terminal_evals", optional_json(r.terminal_evals)},
                {"gaussian_draws", optional_json(r.gaussian_draws)},
                {"cache_hits", optional_json(r.cache_hits)},
                {"wall_time", real_json(r.wall_time)}};
}

ResultRow row_from_json(const json& d) {
    ResultRow r;
    r.variant = d.at("variant").get<std::string>();
    r.cache = d.at("cache").get<bool>();
    r.depth = d.at("depth").get<int>();
    r.samples = d.at("samples").get<int>();
    r.quad_order = d.at("quad_order").get<int>();
    r.replications = d.at("replications").get<int>();
    r.status = d.at("status").get<std::string>();
    r.mean_y = optional_from_json(d.at("mean_y"));
    r.std_y = optional_from_json(d.at("std_y"));
    r.abs_error = optional_from_json(d.at("abs_error"));
    r.bound_status = d.at("bound_status").get<std::string>();
    r.bias_bound = optional_from_json(d.at("bias_bound"));
    r.variance_bound = optional_from_json(d.at("variance_bound"));
    r.quadrature_term = optional_from_json(d.at("quadrature_term"));
    r.mc_term = optional_from_json(d.at("mc_term"));
    r.picard_term = optional_from_json(d.at("picard_term"));
    r.generator_evals = optional_from_json(d.at("generator_evals"));
    r.terminal_evals = optional_from_json(d.at("terminal_evals"));
    r.gaussian_draws = optional_from_json(d.at("gaussian_draws"));
    r.cache_hits = optional_from_json(d.at("cache_hits"));
    r.wall_time = *optional_from_json(d.at("wall_time"));
    return r;
}

json sidecar(const ExperimentSpec& s) {
    return json{{"schema_version", kSchemaVersion},
                {"spec", to_json(s)},
                {"seed", s.seed},
                {"threads", resolve_threads(s.threads)},
                {"columns", csv_columns()}};
}

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string threads;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_format = true) {
    cmd->add_option("--config", f.config, "JSON experiment config");
    cmd->add_option("--seed", f.seed, "root seed (a seed in the config wins)");
    cmd->add_option("--out", f.out, "output path (stdout when absent)");
    cmd->add_option("--threads", f.threads, "worker threads, a count or 'auto'");
    if (with_format) cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

int parse_threads(const std::string& text) {
    if (text == "auto") return 0;
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used == text.size() && v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw InvalidConfig("threads must be a positive count or 'auto', got '" + text + "'");
}

// Flag, then environment, then whatever the config said.
int resolve_thread_flag(const CommonFlags& f, int configured) {
    if (!f.threads.empty()) return parse_threads(f.threads);
    if (const char* env = std::getenv("MLPBSDE_THREADS"); env && *env) return parse_threads(env);
    return configured;
}

// Opens the destination before any work so an unwritable path fails fast.
class Output {
public:
    explicit Output(const std::string& path) : path_(path) {
        if (!path_.empty()) {
            file_.open(path_, std::ios::out | std::ios::trunc);
            if (!file_) throw OutputError("cannot write output '" + path_ + "'");
        }
    }
    std::ostream& stream() { return path_.empty() ? std::cout : file_; }
    const std::string& path() const { return path_; }
    void finish() {
        stream().flush();
        if (!stream()) throw OutputError("write to '" + (path_.empty() ? "stdout" : path_) + "' failed");
    }

private:
    std::string path_;
    std::ofstream file_;
};

struct ContentFlags {
    std::optional<std::string> problem;
    std::optional<int> dim;
    std::optional<double> horizon;
    std::optional<double> alpha;
    std::optional<std::string> variant;
    std::optional<int> depth;
    std::optional<int> samples;
    std::optional<int> quad_order;
    std::optional<double> t;
    std::vector<double> x;
    std::optional<int> replications;
    bool estimate_z = false;
    bool no_cache = false;
    bool strict_printed_form = false;
    bool no_bounds = false;
};

void add_content(CLI::App* cmd, ContentFlags& f) {
    cmd->add_option("--problem", f.problem, "builtin problem name");
    cmd->add_option("--dim", f.dim, "dimension d");
    cmd->add_option("--horizon", f.horizon, "terminal time T");
    cmd->add_option("--alpha", f.alpha, "linear-y coefficient");
    cmd->add_option("--variant", f.variant, "original or modified");
    cmd->add_option("--depth", f.depth, "iteration depth n");
    cmd->add_option("--samples", f.samples, "base sample count M");
    cmd->add_option("--quad-order", f.quad_order, "quadrature order Q");
    cmd->add_option("--t", f.t, "query time");
    cmd->add_option("--x", f.x, "query point (one value broadcasts)");
    cmd->add_option("--replications", f.replications, "independent replications R");
    cmd->add_flag("--z", f.estimate_z, "also estimate z");
    cmd->add_flag("--no-cache", f.no_cache, "recompute y_{n-2} at shared points");
    cmd->add_flag("--strict-printed-form", f.strict_printed_form, "printed leading z term");
    cmd->add_flag("--no-bounds", f.no_bounds, "skip theorem bounds");
}

ExperimentSpec spec_from_flags(const ContentFlags& f, ExperimentSpec s) {
    if (f.problem) s.problem = *f.problem;
    if (f.dim) s.options.dim = *f.dim;
    if (f.horizon) s.options.horizon = *f.horizon;
    if (f.alpha) s.options.alpha = *f.alpha;
    if (f.variant) s.variants = {parse_variant(*f.variant)};
    if (f.depth) s.depths = {*f.depth};
    if (f.samples) s.samples = {*f.samples};
    if (f.quad_order) s.quad_orders = {*f.quad_order};
    if (f.t) s.t = *f.t;
    if (!f.x.empty()) s.x = f.x;
    if (f.replications) s.replications = *f.replications;
    if (f.estimate_z) s.estimate_z = true;
    if (f.no_cache) s.cache = {false};
    if (f.strict_printed_form) s.strict_printed_form = true;
    if (f.no_bounds) s.theorem_bounds = false;
    return s;
}

// Flags first, then the config file on top: the file wins for experiment content.
ExperimentSpec resolve_spec(const CommonFlags& common, const ContentFlags* content) {
    ExperimentSpec s;
    if (content) s = spec_from_flags(*content, s);
    if (common.seed) s.seed = *common.seed;
    if (!common.config.empty()) s = parse_spec(read_json_file(common.config), s);
    s.threads = resolve_thread_flag(common, s.threads);
    if (!common.out.empty()) s.output = common.out;
    return s;
}

int emit_experiment(const ExperimentSpec& s, const std::string& format) {
    validate_spec(s);
    Output out(s.output.value_or(""));
    std::unique_ptr<std::ofstream> side;
    if (format == "csv" && !out.path().empty()) {
        side = std::make_unique<std::ofstream>(out.path() + ".json");
        if (!*side) throw OutputError("cannot write output '" + out.path() + ".json'");
    }
    const auto result = run_experiment(s);
    if (format == "csv") {
        out.stream() << to_csv(result.rows);
        if (side) *side << sidecar(s).dump(2) << '\n';
    } else {
        json doc = sidecar(s);
        json rows = json::array();
        for (const auto& r : result.rows) rows.push_back(to_json(r));
        doc["rows"] = rows;
        out.stream() << doc.dump(2) << '\n';
    }
    out.finish();
    for (const auto& msg : result.failures) std::cerr << "mlpbsde: " << msg << '\n';
    if (!result.failures.empty()) {
        std::cerr << "mlpbsde: " << result.failures.size() << " of " << result.rows.size() << " cells failed\n";
        return kCellFailures;
    }
    return kOk;
}

std::size_t cell_count(const ExperimentSpec& s) {
    std::size_t n = 0;
    for (Variant v : s.variants) n += v == Variant::original ? 1 : s.cache.size();
    return n * s.depths.size() * s.samples.size() * s.quad_orders.size();
}

json report_json(const AssumptionReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"constant", c.constant},
                          {"description", c.description},
                          {"status", c.status == CheckStatus::checked ? "checked" : "skipped"},
                          {"declared", c.declared ? real_json(*c.declared) : json(nullptr)},
                          {"max_observed", real_json(c.max_observed)},
                          {"max_violation", real_json(c.max_violation)},
                          {"probes", c.probes},
                          {"note", c.note}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"problem", r.problem},
                {"all_satisfied", r.all_satisfied()},
                {"checks", checks}};
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Multilevel Picard BSDE solver and experiment runner"};
    app.require_subcommand(1);

    CommonFlags solve_common, sweep_common, validate_common, oracle_common;
    ContentFlags solve_content, validate_content, oracle_content;
    int validate_samples = 1000;

    auto* solve = app.add_subcommand("solve", "one cell: a single variant, depth, M and Q");
    add_common(solve, solve_common);
    add_content(solve, solve_content);

    auto* sweep = app.add_subcommand("sweep", "every cell of the config grid");
    add_common(sweep, sweep_common);

    auto* validate = app.add_subcommand("validate", "probe the declared assumption constants");
    add_common(validate, validate_common, false);
    validate->add_option("--problem", validate_content.problem, "builtin problem name");
    validate->add_option("--dim", validate_content.dim, "dimension d");
    validate->add_option("--horizon", validate_content.horizon, "terminal time T");
    validate->add_option("--alpha", validate_content.alpha, "linear-y coefficient");
    validate->add_option("--probes", validate_samples, "random probes per constant");

    auto* oracle = app.add_subcommand("oracle", "deterministic Picard iterate, d = 1");
    add_common(oracle, oracle_common, false);
    oracle->add_option("--problem", oracle_content.problem, "builtin problem name");
    oracle->add_option("--horizon", oracle_content.horizon, "terminal time T");
    oracle->add_option("--alpha", oracle_content.alpha, "linear-y coefficient");
    oracle->add_option("--depth", oracle_content.depth, "iteration depth n");
    oracle->add_option("--quad-order", oracle_content.quad_order, "quadrature order Q");
    oracle->add_option("--t", oracle_content.t, "query time");
    oracle->add_option("--x", oracle_content.x, "query point");

    auto* list = app.add_subcommand("list-problems", "builtin problems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*list) {
            for (const auto& name : builtin_problem_names()) std::cout << name << "\t" << describe_problem(name) << '\n';
            return kOk;
        }
        if (*sweep) {
            if (sweep_common.config.empty()) throw InvalidConfig("sweep needs --config");
            return emit_experiment(resolve_spec(sweep_common, nullptr), sweep_common.format);
        }
        if (*solve) {
            const auto s = resolve_spec(solve_common, &solve_content);
            validate_spec(s);
            if (cell_count(s) != 1) throw InvalidConfig("solve runs a single cell; use sweep for grids");
            return emit_experiment(s, solve_common.format);
        }
        if (*validate) {
            auto s = spec_from_flags(validate_content, ExperimentSpec{});
            if (validate_common.seed) s.seed = *validate_common.seed;
            if (!validate_common.config.empty()) s = parse_spec(read_json_file(validate_common.config), s);
            if (!validate_common.out.empty()) s.output = validate_common.out;
            const auto p = make_problem(s.problem, s.options);
            Output out(s.output.value_or(""));
            const auto report = validate_assumptions(p, validate_samples, s.seed);
            out.stream() << report_json(report).dump(2) << '\n';
            out.finish();
            return kOk;
        }
        if (*oracle) {
            auto s = spec_from_flags(oracle_content, ExperimentSpec{});
            if (!oracle_common.config.empty()) s = parse_spec(read_json_file(oracle_common.config), s);
            if (!oracle_common.out.empty()) s.output = oracle_common.out;
            const auto p = make_problem(s.problem, s.options);
            if (s.depths.size() != 1 || s.quad_orders.size() != 1 || s.x.size() != 1) {
                throw InvalidConfig("oracle needs one depth, one quadrature order and a scalar x");
            }
            Output out(s.output.value_or(""));
            const double v = deterministic_picard(p, s.depths.front(), s.quad_orders.front(), s.t, s.x.front());
            out.stream() << json{{"schema_version", kSchemaVersion},
                                 {"problem", s.problem},
                                 {"depth", s.depths.front()},
                                 {"quad_order", s.quad_orders.front()},
                                 {"t", s.t},
                                 {"x", s.x.front()},
                                 {"value", v}}
                                .dump(2)
                         << '\n';
            out.finish();
            return kOk;
        }
    } catch (const UnknownProblem& e) {
        std::cerr << "mlpbsde: " << e.what() << '\n';
        return kUnknownProblem;
    } catch (const OracleUnavailable& e) {
        std::cerr << "mlpbsde: " << e.what() << '\n';
        return kOracleUnavailable;
    } catch (const OutputError& e) {
        std::cerr << "mlpbsde: " << e.what() << '\n';
        return kUnwritableOutput;
    } catch (const Error& e) {
        std::cerr << "mlpbsde: " << e.what() << '\n';
        return kBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "mlpbsde: internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}

} // namespace mlpbsde::cli
