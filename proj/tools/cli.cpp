#include "cli.hpp"

#include "npmv/npmv.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace npmv::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;

    std::string dataset;
    std::string prices_a;
    std::string prices_b;
    std::string risk;
    int lag = 0;

    std::string kernel = "epanechnikov";
    double bandwidth = 0.0;  // 0 selects by blocked CV
    double bandwidth_cov = 0.0;
    double bandwidth_quantile = 0.0;
    std::vector<double> cv_grid = CvConfig{}.candidate_grid;
    int cv_blocks = CvConfig{}.n_blocks;

    std::vector<double> levels{0.05, 0.5, 0.95};
    double alpha = 0.05;
    double var_level = 0.95;
    std::string frequency = "weekly";
    int window = 5;

    std::string grid = "obs";
    std::string points;
    int sweep_covariate = 1;
    double sweep_from = -2.0;
    double sweep_to = 2.0;
    int sweep_count = 41;

    int max_iter = IrlsConfig{}.max_iter;
    double tol = IrlsConfig{}.tol;
    double stabilizer = IrlsConfig{}.stabilizer;

    std::uint64_t seed = SimConfig{}.seed;
    int replications = SimConfig{}.replications;
    std::vector<std::size_t> sample_sizes{100, 500, 1000};
    std::vector<std::string> error_dists{"normal", "exponential", "t3"};
    std::vector<double> ar_coeff{0.5, 0.5, 0.5};
    double lambda = 0.5;
    std::vector<double> b_coeffs{0.5, 0.3, 0.2};
    std::size_t grid_points = 25;
    std::size_t oracle_draws = 100000;
    int include_mean = 1;

    unsigned threads = 0;  // 0 reads NPMV_THREADS
    std::string out_dir = "npmv_out";
};

const std::vector<std::string> kCommands{"fit-mean", "fit-cov",  "fit-quantile",    "var",
                                         "simulate", "replay",   "select-bandwidth"};

// ---------------------------------------------------------------- config echo

json config_to_json(const RunConfig& c) {
    json j;
    j["dataset"] = c.dataset;
    j["prices-a"] = c.prices_a;
    j["prices-b"] = c.prices_b;
    j["risk"] = c.risk;
    j["lag"] = c.lag;
    j["kernel"] = c.kernel;
    j["bandwidth"] = c.bandwidth;
    j["bandwidth-cov"] = c.bandwidth_cov;
    j["bandwidth-quantile"] = c.bandwidth_quantile;
    j["cv-grid"] = c.cv_grid;
    j["cv-blocks"] = c.cv_blocks;
    j["levels"] = c.levels;
    j["alpha"] = c.alpha;
    j["var-level"] = c.var_level;
    j["frequency"] = c.frequency;
    j["window"] = c.window;
    j["grid"] = c.grid;
    j["points"] = c.points;
    j["sweep-covariate"] = c.sweep_covariate;
    j["sweep-from"] = c.sweep_from;
    j["sweep-to"] = c.sweep_to;
    j["sweep-count"] = c.sweep_count;
    j["max-iter"] = c.max_iter;
    j["tol"] = c.tol;
    j["stabilizer"] = c.stabilizer;
    j["seed"] = c.seed;
    j["replications"] = c.replications;
    j["sample-sizes"] = c.sample_sizes;
    j["error-dists"] = c.error_dists;
    j["ar-coeff"] = c.ar_coeff;
    j["lambda"] = c.lambda;
    j["b-coeffs"] = c.b_coeffs;
    j["grid-points"] = c.grid_points;
    j["oracle-draws"] = c.oracle_draws;
    j["include-mean"] = c.include_mean;
    j["threads"] = c.threads;
    j["out-dir"] = c.out_dir;
    return j;
}

std::string json_scalar_to_arg(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
}

/// Rebuilds a command line from a manifest; options named in `explicit_keys` are left to the caller.
std::vector<std::string> manifest_to_args(const std::string& path, const std::set<std::string>& explicit_keys) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest '" + path + "'");
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw ParseError("manifest '" + path + "' is not valid JSON: " + e.what());
    }
    if (!m.contains("command") || !m["command"].is_string() || !m.contains("config") || !m["config"].is_object()) {
        throw ParseError("manifest '" + path + "' lacks a command or config section");
    }
    std::vector<std::string> args{m["command"].get<std::string>()};
    for (const auto& [key, value] : m["config"].items()) {
        if (explicit_keys.count(key)) continue;
        if (value.is_array()) {
            if (value.empty()) continue;
            args.push_back("--" + key);
            for (const auto& v : value) args.push_back(json_scalar_to_arg(v));
        } else {
            args.push_back("--" + key);
            args.push_back(json_scalar_to_arg(value));
        }
    }
    return args;
}

// ---------------------------------------------------------------- validation

void validate(const RunConfig& c) {
    auto fail = [](const std::string& m) { throw UsageError(m); };
    for (const double tau : c.levels) {
        if (!(tau > 0.0 && tau < 1.0)) fail("--levels must lie in (0, 1)");
    }
    std::set<double> distinct(c.levels.begin(), c.levels.end());
    if (distinct.size() != c.levels.size()) fail("--levels must be distinct");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("--alpha must lie in (0, 1)");
    if (!(c.var_level > 0.0 && c.var_level < 1.0)) fail("--var-level must lie in (0, 1)");
    if (c.bandwidth < 0.0 || c.bandwidth_cov < 0.0 || c.bandwidth_quantile < 0.0) {
        fail("bandwidth overrides must be positive (0 means automatic)");
    }
    if (c.lag < 0) fail("--lag must be non-negative");
    if (c.frequency != "weekly" && c.frequency != "daily") fail("--frequency must be weekly or daily");
    if (c.grid != "obs" && c.grid != "sweep" && c.grid != "points") fail("--grid must be obs, sweep or points");
    if (c.grid == "points" && c.points.empty()) fail("--grid points needs --points FILE");
    if (c.grid == "sweep" && c.sweep_count < 1) fail("--sweep-count must be >= 1");
    if (c.window < 2) fail("--window must be >= 2");
    if (c.ar_coeff.size() != 3) fail("--ar-coeff takes three values");
    if (c.b_coeffs.size() != 3) fail("--b-coeffs takes three values");
    if (c.kernel != "epanechnikov" && c.kernel != "gaussian") fail("--kernel must be epanechnikov or gaussian");
    for (const auto& d : c.error_dists) {
        if (d != "normal" && d != "t3" && d != "exponential") fail("unknown error distribution '" + d + "'");
    }
    if (c.sample_sizes.empty()) fail("--sample-sizes needs at least one value");
    if (c.include_mean != 0 && c.include_mean != 1) fail("--include-mean must be 0 or 1");
    const bool has_dataset = !c.dataset.empty();
    const bool has_prices = !c.prices_a.empty() || !c.prices_b.empty() || !c.risk.empty();
    if (has_dataset && has_prices) fail("give either --dataset or --prices-a/--prices-b/--risk, not both");
    if (has_prices && (c.prices_a.empty() || c.prices_b.empty() || c.risk.empty())) {
        fail("--prices-a, --prices-b and --risk must be given together");
    }
    if (c.command != "simulate" && !has_dataset && !has_prices) {
        fail(c.command + " needs --dataset or --prices-a/--prices-b/--risk");
    }
}

IrlsConfig irls_config(const RunConfig& c) {
    IrlsConfig i;
    i.max_iter = c.max_iter;
    i.tol = c.tol;
    i.stabilizer = c.stabilizer;
    try {
        i.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return i;
}

unsigned threads_of(const RunConfig& c) { return c.threads ? c.threads : default_thread_count(); }

// ---------------------------------------------------------------- inputs

struct Inputs {
    Dataset data;
    std::optional<AlignReport> alignment;
    ReturnSeries returns_a;
    ReturnSeries returns_b;
};

Inputs load_inputs(const RunConfig& c) {
    if (!c.dataset.empty()) {
        return Inputs{load_dataset_csv(c.dataset), std::nullopt, {}, {}};
    }
    ReturnSeries ra = log_returns(load_price_csv(c.prices_a));
    ReturnSeries rb = log_returns(load_price_csv(c.prices_b));
    AlignedData aligned = align(ra, rb, load_risk_csv(c.risk), c.lag);
    return Inputs{std::move(aligned.data), std::move(aligned.report), std::move(ra), std::move(rb)};
}

struct GridPoint {
    std::string label;
    Eigen::VectorXd z;  // standardized scale
};

std::vector<GridPoint> observation_grid(const Dataset& d) {
    std::vector<GridPoint> g;
    for (Eigen::Index t = 0; t < d.n(); ++t) {
        g.push_back({d.times().empty() ? std::to_string(t) : d.times()[t], d.standardized().row(t).transpose()});
    }
    return g;
}

std::vector<GridPoint> evaluation_grid(const RunConfig& c, const Dataset& d) {
    if (c.grid == "obs") return observation_grid(d);
    std::vector<GridPoint> g;
    if (c.grid == "sweep") {
        if (c.sweep_covariate < 1 || c.sweep_covariate > d.k()) {
            throw UsageError("--sweep-covariate must be between 1 and " + std::to_string(d.k()));
        }
        for (int i = 0; i < c.sweep_count; ++i) {
            const double v = c.sweep_count == 1
                                 ? c.sweep_from
                                 : c.sweep_from + (c.sweep_to - c.sweep_from) * i / (c.sweep_count - 1);
            Eigen::VectorXd z = Eigen::VectorXd::Zero(d.k());
            z(c.sweep_covariate - 1) = v;
            g.push_back({std::to_string(i), std::move(z)});
        }
        return g;
    }
    const auto table = detail::read_csv(c.points, {});
    std::vector<std::size_t> cols;
    for (Eigen::Index j = 0; j < d.k(); ++j) {
        const auto it = table.columns.find("x" + std::to_string(j + 1));
        if (it == table.columns.end()) {
            throw ParseError(c.points + ": header needs columns x1..x" + std::to_string(d.k()));
        }
        cols.push_back(it->second);
    }
    const auto label_col = table.columns.find("label");
    for (const auto& [line_no, fields] : table.rows) {
        Eigen::VectorXd raw(d.k());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto v = detail::parse_number(fields[cols[j]]);
            if (!v) {
                throw ParseError(c.points + ": row " + std::to_string(line_no) + ": malformed number '" +
                                 fields[cols[j]] + "'");
            }
            raw(static_cast<Eigen::Index>(j)) = *v;
        }
        const std::string label =
            label_col != table.columns.end() ? fields[label_col->second] : std::to_string(g.size());
        g.push_back({label, d.standardize(raw)});
    }
    return g;
}

// ---------------------------------------------------------------- output

class Run {
public:
    Run(const RunConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {
        fs::create_directories(cfg.out_dir);
        manifest_["tool"] = "npmv";
        manifest_["version"] = kVersion;
        manifest_["command"] = cfg.command;
        manifest_["seed"] = cfg.seed;
        manifest_["config"] = config_to_json(cfg);
        manifest_["outputs"] = json::array();
    }

    std::ofstream open(const std::string& name) {
        const fs::path path = fs::path(cfg_.out_dir) / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
        manifest_["outputs"].push_back(name);
        out_ << "wrote " << path.string() << '\n';
        return f;
    }

    json& manifest() { return manifest_; }

    void finish(double seconds) {
        manifest_["wall_time_seconds"] = seconds;
        const fs::path path = fs::path(cfg_.out_dir) / "manifest.json";
        std::ofstream f(path, std::ios::binary);
        f << manifest_.dump(2) << '\n';
        out_ << "wrote " << path.string() << '\n';
    }

private:
    const RunConfig& cfg_;
    std::ostream& out_;
    json manifest_;
};

std::string num(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

void write_point_prefix(std::ostream& f, const Dataset& d, const GridPoint& g) {
    f << g.label;
    const Eigen::VectorXd raw = d.destandardize(g.z);
    for (Eigen::Index j = 0; j < raw.size(); ++j) f << ',' << num(raw(j));
}

void write_point_header(std::ostream& f, const Dataset& d, const std::string& first) {
    f << first;
    for (Eigen::Index j = 0; j < d.k(); ++j) f << ",x" << j + 1;
}

std::string first_column(const RunConfig& c) { return c.grid == "obs" ? "date" : "point"; }

/// Runs `fit` on every grid point; failed points keep NaN rows and are counted.
template <typename Fit>
std::vector<Eigen::VectorXd> fit_grid(const std::vector<GridPoint>& grid, Eigen::Index width, unsigned threads,
                                      int& failures, std::string& first_error, Fit&& fit) {
    std::vector<Eigen::VectorXd> rows(grid.size());
    std::vector<std::string> errors(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t i) {
            try {
                rows[i] = fit(grid[i].z);
            } catch (const Error& e) {
                rows[i] = Eigen::VectorXd::Constant(width, std::numeric_limits<double>::quiet_NaN());
                errors[i] = e.category() + ": " + e.what();
            }
        },
        threads);
    failures = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (errors[i].empty()) continue;
        if (first_error.empty()) first_error = "point " + grid[i].label + ": " + errors[i];
        ++failures;
    }
    if (!grid.empty() && failures == static_cast<int>(grid.size())) {
        throw EmptyNeighborhoodError("no grid point could be evaluated (" + first_error + ")");
    }
    return rows;
}

struct Bandwidths {
    Bandwidth mean{1.0};
    Bandwidth cov{1.0};
    Bandwidth quantile{1.0};
    std::optional<CvReport> cv;
};

void write_cv_report(Run& run, const CvReport& rep) {
    auto f = run.open("cv_report.csv");
    f << "bandwidth,score,empty_points";
    for (Eigen::Index j = 0; j < rep.per_block_scores.cols(); ++j) f << ",block_" << j + 1;
    f << ",selected\n";
    for (std::size_t c = 0; c < rep.candidates.size(); ++c) {
        f << num(rep.candidates[c]) << ',' << num(rep.scores[c]) << ',' << rep.empty_points[c];
        for (Eigen::Index j = 0; j < rep.per_block_scores.cols(); ++j) {
            f << ',' << num(rep.per_block_scores(static_cast<Eigen::Index>(c), j));
        }
        f << ',' << (rep.candidates[c] == rep.selected.value() ? 1 : 0) << '\n';
    }
}

CvReport run_cv(const RunConfig& c, const Dataset& d, const KernelSpec& spec) {
    CvConfig cv;
    cv.candidate_grid = c.cv_grid;
    cv.n_blocks = c.cv_blocks;
    try {
        return blocked_cv_bandwidth(d, spec, cv);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("bandwidth selection: ") + e.what());
    }
}

Bandwidths resolve_bandwidths(const RunConfig& c, const Dataset& d, const KernelSpec& spec, Run& run) {
    Bandwidths b;
    if (c.bandwidth > 0.0) {
        b.mean = Bandwidth(c.bandwidth);
    } else {
        b.cv = run_cv(c, d, spec);
        b.mean = b.cv->selected;
        write_cv_report(run, *b.cv);
    }
    b.cov = c.bandwidth_cov > 0.0 ? Bandwidth(c.bandwidth_cov) : b.mean;
    b.quantile = c.bandwidth_quantile > 0.0 ? Bandwidth(c.bandwidth_quantile)
                                            : quantile_bandwidth(d.n(), static_cast<int>(d.k()), b.mean.value());
    run.manifest()["bandwidths"] = {{"mean", b.mean.value()},
                                    {"cov", b.cov.value()},
                                    {"quantile", b.quantile.value()},
                                    {"selected_by_cv", b.cv.has_value()}};
    return b;
}

void note_failures(Run& run, const std::string& what, int failures, const std::string& first_error) {
    run.manifest()["failed_points"][what] = failures;
    if (!first_error.empty()) run.manifest()["first_failure"][what] = first_error;
}

// ---------------------------------------------------------------- commands

void fit_mean(const RunConfig& c, const Dataset& d, const KernelSpec& spec, const Bandwidths& b,
              const std::vector<GridPoint>& grid, Run& run) {
    const Eigen::Index p = d.p();
    const Eigen::MatrixXd fits = fitted_means(d, spec, b.mean);
    int failures = 0;
    std::string first_error;
    const auto rows = fit_grid(grid, 3 * p + 1, threads_of(c), failures, first_error, [&](const Eigen::VectorXd& z) {
        const MeanEstimate m = estimate_mean(d, z, spec, b.mean);
        const auto bands = basis_bands(d, z, spec, b.mean, c.alpha, fits);
        Eigen::VectorXd r(3 * p + 1);
        for (Eigen::Index j = 0; j < p; ++j) {
            r(j) = m.point(j);
            r(p + 2 * j) = bands[j].low();
            r(p + 2 * j + 1) = bands[j].high();
        }
        r(3 * p) = m.density;
        return r;
    });
    auto f = run.open("fit_mean.csv");
    write_point_header(f, d, first_column(c));
    for (Eigen::Index j = 0; j < p; ++j) f << ",mu_" << j + 1;
    for (Eigen::Index j = 0; j < p; ++j) f << ",band_low_" << j + 1 << ",band_high_" << j + 1;
    f << ",density\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        write_point_prefix(f, d, grid[i]);
        for (Eigen::Index j = 0; j < rows[i].size(); ++j) f << ',' << num(rows[i](j));
        f << '\n';
    }
    note_failures(run, "fit-mean", failures, first_error);
}

void fit_cov(const RunConfig& c, const Dataset& d, const KernelSpec& spec, const Bandwidths& b,
             const std::vector<GridPoint>& grid, Run& run) {
    const Eigen::Index p = d.p();
    const Eigen::Index width = p * (p + 1) / 2 + 1;
    const Eigen::MatrixXd fits = fitted_means(d, spec, b.mean);
    int failures = 0;
    std::string first_error;
    const auto rows = fit_grid(grid, width, threads_of(c), failures, first_error, [&](const Eigen::VectorXd& z) {
        const CovEstimate cov = estimate_cov(d, z, spec, b.cov, fits);
        Eigen::VectorXd r(width);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = i; j < p; ++j) r(k++) = cov.matrix(i, j);
        }
        r(k) = cov.generalized_variance;
        return r;
    });
    auto f = run.open("fit_cov.csv");
    write_point_header(f, d, first_column(c));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i; j < p; ++j) f << ",s" << i + 1 << j + 1;
    }
    f << ",generalized_variance\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        write_point_prefix(f, d, grid[i]);
        for (Eigen::Index j = 0; j < rows[i].size(); ++j) f << ',' << num(rows[i](j));
        f << '\n';
    }
    note_failures(run, "fit-cov", failures, first_error);
}

void fit_quantile(const RunConfig& c, const Dataset& d, const KernelSpec& spec, const Bandwidths& b,
                  const std::vector<GridPoint>& grid, Run& run) {
    const Eigen::Index p = d.p();
    const auto m = static_cast<Eigen::Index>(c.levels.size());
    const Eigen::Index width = m * p + 4;
    const IrlsConfig irls = irls_config(c);
    int failures = 0;
    std::string first_error;
    const auto rows = fit_grid(grid, width, threads_of(c), failures, first_error, [&](const Eigen::VectorXd& z) {
        const NoncrossingReport rep = check_noncrossing(d, z, spec, b.quantile, c.levels, irls);
        Eigen::VectorXd r(width);
        bool converged = true;
        double max_foc = 0.0;
        for (Eigen::Index l = 0; l < m; ++l) {
            const QuantileEstimate& q = rep.estimates[l];
            r.segment(l * p, p) = q.q;
            converged = converged && q.converged;
            max_foc = std::max(max_foc, q.foc_residual_norm);
        }
        double min_sep = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = i + 1; j < m; ++j) min_sep = std::min(min_sep, rep.distances(i, j));
        }
        r(m * p) = rep.ok ? 1.0 : 0.0;
        r(m * p + 1) = m > 1 ? min_sep : std::numeric_limits<double>::quiet_NaN();
        r(m * p + 2) = converged ? 1.0 : 0.0;
        r(m * p + 3) = max_foc;
        return r;
    });
    auto f = run.open("fit_quantile.csv");
    write_point_header(f, d, first_column(c));
    for (const double tau : c.levels) {
        for (Eigen::Index j = 0; j < p; ++j) f << ",q" << format_double(tau) << '_' << j + 1;
    }
    f << ",noncrossing,min_separation,converged,max_foc_residual\n";
    int crossing = 0;
    int unconverged = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        write_point_prefix(f, d, grid[i]);
        const Eigen::VectorXd& r = rows[i];
        for (Eigen::Index j = 0; j < m * p; ++j) f << ',' << num(r(j));
        if (std::isnan(r(m * p))) {
            f << ",NA,NA,NA,NA\n";
            continue;
        }
        crossing += r(m * p) == 0.0;
        unconverged += r(m * p + 2) == 0.0;
        f << ',' << static_cast<int>(r(m * p)) << ',' << num(r(m * p + 1)) << ',' << static_cast<int>(r(m * p + 2))
          << ',' << num(r(m * p + 3)) << '\n';
    }
    note_failures(run, "fit-quantile", failures, first_error);
    run.manifest()["noncrossing"] = {{"levels", c.levels},
                                     {"points_failing_separation", crossing},
                                     {"points_not_converged", unconverged}};
}

void var_series(const RunConfig& c, const Dataset& d, const KernelSpec& spec, const Bandwidths& b, Run& run) {
    const IrlsConfig irls = irls_config(c);
    std::vector<GridPoint> grid = observation_grid(d);
    if (c.frequency == "weekly") {
        std::vector<GridPoint> weekly;
        std::optional<long> current;
        for (auto& g : grid) {
            const auto date = parse_date(g.label);
            if (!date) throw ParseError("weekly VaR needs ISO dates in the time index, got '" + g.label + "'");
            if (current && *current == date->week_key()) {
                weekly.back() = std::move(g);
            } else {
                weekly.push_back(std::move(g));
            }
            current = date->week_key();
        }
        grid = std::move(weekly);
    }
    const Eigen::Index p = d.p();
    int failures = 0;
    std::string first_error;
    const auto rows = fit_grid(grid, p + 1, threads_of(c), failures, first_error, [&](const Eigen::VectorXd& z) {
        const VarEstimate v = var_estimate(d, z, spec, b.quantile, c.var_level, irls);
        Eigen::VectorXd r(p + 1);
        r.head(p) = v.value;
        r(p) = v.fit.converged ? 1.0 : 0.0;
        return r;
    });
    auto f = run.open("var.csv");
    write_point_header(f, d, "date");
    for (Eigen::Index j = 0; j < p; ++j) f << ",var_" << j + 1;
    f << ",converged\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        write_point_prefix(f, d, grid[i]);
        for (Eigen::Index j = 0; j < p; ++j) f << ',' << num(rows[i](j));
        f << ',' << (std::isnan(rows[i](p)) ? std::string("NA") : std::to_string(static_cast<int>(rows[i](p))))
          << '\n';
    }
    note_failures(run, "var", failures, first_error);
    run.manifest()["var"] = {{"level", c.var_level}, {"frequency", c.frequency}};
}

void volatility(const RunConfig& c, const Dataset& d, Run& run) {
    if (d.n() < c.window) return;
    std::vector<std::vector<double>> vols;
    for (Eigen::Index j = 0; j < d.p(); ++j) {
        std::vector<double> col(d.responses().col(j).data(), d.responses().col(j).data() + d.n());
        vols.push_back(rolling_volatility(col, static_cast<std::size_t>(c.window)));
    }
    auto f = run.open("volatility.csv");
    f << "date";
    for (Eigen::Index j = 0; j < d.p(); ++j) f << ",vol_" << j + 1;
    f << '\n';
    for (std::size_t i = 0; i < vols[0].size(); ++i) {
        const std::size_t t = i + static_cast<std::size_t>(c.window) - 1;
        f << (d.times().empty() ? std::to_string(t) : d.times()[t]);
        for (const auto& v : vols) f << ',' << num(v[i]);
        f << '\n';
    }
}

void simulate(const RunConfig& c, Run& run, std::ostream& out) {
    McPlan plan;
    plan.base.ar_coeff = {c.ar_coeff[0], c.ar_coeff[1], c.ar_coeff[2]};
    plan.base.common_innovation_weight = c.lambda;
    plan.base.b_coeffs = {c.b_coeffs[0], c.b_coeffs[1], c.b_coeffs[2]};
    plan.base.seed = c.seed;
    plan.base.replications = c.replications;
    plan.sample_sizes = c.sample_sizes;
    plan.error_dists.clear();
    for (const auto& e : c.error_dists) plan.error_dists.push_back(error_dist_from_string(e));
    plan.targets.clear();
    if (c.include_mean) plan.targets.push_back(McTarget::mean());
    for (const double tau : c.levels) plan.targets.push_back(McTarget::quantile(tau));
    if (plan.targets.empty()) throw UsageError("simulate needs --include-mean 1 or at least one level");
    plan.grid_points = c.grid_points;
    plan.oracle_draws = c.oracle_draws;
    plan.kernel = kernel_family_from_string(c.kernel);
    plan.cv.candidate_grid = c.cv_grid;
    plan.cv.n_blocks = c.cv_blocks;
    plan.irls = irls_config(c);
    plan.threads = threads_of(c);
    try {
        plan.base.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const McReport report = run_monte_carlo(plan);
    {
        auto f = run.open("mc_report.csv");
        write_mc_report_csv(report, f);
    }
    print_mc_table(report, out);
    run.manifest()["log"] = report.log;
}

void dispatch(const RunConfig& c, Run& run, std::ostream& out) {
    if (c.command == "simulate") {
        simulate(c, run, out);
        return;
    }
    const Inputs in = load_inputs(c);
    const Dataset& d = in.data;
    const KernelSpec spec(kernel_family_from_string(c.kernel), static_cast<int>(d.k()));
    run.manifest()["data"] = {{"n", d.n()}, {"p", d.p()}, {"k", d.k()}};
    if (in.alignment) {
        json dropped = json::array();
        for (const auto& date : in.alignment->dropped) dropped.push_back(date.iso());
        run.manifest()["alignment"] = {{"lag", c.lag}, {"dropped", dropped}};
    }

    if (c.command == "select-bandwidth") {
        const CvReport rep = run_cv(c, d, spec);
        write_cv_report(run, rep);
        run.manifest()["bandwidths"] = {{"mean", rep.selected.value()}, {"selected_by_cv", true}};
        out << "selected bandwidth " << format_double(rep.selected.value()) << '\n';
        return;
    }

    const Bandwidths b = resolve_bandwidths(c, d, spec, run);
    if (c.command == "replay") {
        {
            auto f = run.open("dataset.csv");
            write_dataset_csv(d, f);
        }
        if (in.alignment) {
            auto f = run.open("alignment.csv");
            f << "dropped_date\n";
            for (const auto& date : in.alignment->dropped) f << date.iso() << '\n';
        }
        const std::vector<GridPoint> grid = evaluation_grid(c, d);
        fit_mean(c, d, spec, b, grid, run);
        fit_cov(c, d, spec, b, grid, run);
        fit_quantile(c, d, spec, b, grid, run);
        var_series(c, d, spec, b, run);
        volatility(c, d, run);
        return;
    }
    if (c.command == "var") {
        var_series(c, d, spec, b, run);
        return;
    }
    const std::vector<GridPoint> grid = evaluation_grid(c, d);
    if (c.command == "fit-mean") fit_mean(c, d, spec, b, grid, run);
    if (c.command == "fit-cov") fit_cov(c, d, spec, b, grid, run);
    if (c.command == "fit-quantile") fit_quantile(c, d, spec, b, grid, run);
}

// ---------------------------------------------------------------- parsing

void add_options(CLI::App& app, RunConfig& c) {
    app.add_option("--dataset", c.dataset, "Dataset CSV with columns date,y1..yp,x1..xk");
    app.add_option("--prices-a", c.prices_a, "Price CSV (date,close) for the first asset");
    app.add_option("--prices-b", c.prices_b, "Price CSV (date,close) for the second asset");
    app.add_option("--risk", c.risk, "Risk-index CSV (date,gprd,gprd_a,gprd_t)");
    app.add_option("--lag", c.lag, "Pair each return with the risk row this many rows earlier")->capture_default_str();

    app.add_option("--kernel", c.kernel, "epanechnikov | gaussian")->capture_default_str();
    app.add_option("--bandwidth", c.bandwidth, "Mean bandwidth (0 selects by blocked CV)")->capture_default_str();
    app.add_option("--bandwidth-cov", c.bandwidth_cov, "Covariance bandwidth (0: same as mean)")
        ->capture_default_str();
    app.add_option("--bandwidth-quantile", c.bandwidth_quantile, "Quantile bandwidth (0: rate rule)")
        ->capture_default_str();
    app.add_option("--cv-grid", c.cv_grid, "Candidate bandwidths for blocked CV")->delimiter(',')->capture_default_str();
    app.add_option("--cv-blocks", c.cv_blocks, "Number of contiguous CV blocks")->capture_default_str();

    app.add_option("--levels", c.levels, "Quantile levels tau")->delimiter(',')->capture_default_str();
    app.add_option("--alpha", c.alpha, "Band level is 1 - alpha")->capture_default_str();
    app.add_option("--var-level", c.var_level, "VaR level")->capture_default_str();
    app.add_option("--frequency", c.frequency, "VaR series: weekly | daily")->capture_default_str();
    app.add_option("--window", c.window, "Rolling volatility window")->capture_default_str();

    app.add_option("--grid", c.grid, "Evaluation grid: obs | sweep | points")->capture_default_str();
    app.add_option("--points", c.points, "CSV of raw evaluation points (x1..xk, optional label)");
    app.add_option("--sweep-covariate", c.sweep_covariate, "Covariate varied by the sweep (1-based)")
        ->capture_default_str();
    app.add_option("--sweep-from", c.sweep_from, "Sweep start, standardized units")->capture_default_str();
    app.add_option("--sweep-to", c.sweep_to, "Sweep end, standardized units")->capture_default_str();
    app.add_option("--sweep-count", c.sweep_count, "Number of sweep points")->capture_default_str();

    app.add_option("--max-iter", c.max_iter, "IRLS iteration cap")->capture_default_str();
    app.add_option("--tol", c.tol, "IRLS relative step tolerance")->capture_default_str();
    app.add_option("--stabilizer", c.stabilizer, "IRLS weight stabilizer theta")->capture_default_str();

    app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
    app.add_option("--replications", c.replications, "Monte Carlo replications")->capture_default_str();
    app.add_option("--sample-sizes", c.sample_sizes, "Simulated sample sizes; the first is the MAPE baseline")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--error-dists", c.error_dists, "normal, exponential, t3")->delimiter(',')->capture_default_str();
    app.add_option("--ar-coeff", c.ar_coeff, "AR(1) coefficients of the three covariates")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--lambda", c.lambda, "Common innovation weight")->capture_default_str();
    app.add_option("--b-coeffs", c.b_coeffs, "Loadings of the second response")->delimiter(',')->capture_default_str();
    app.add_option("--grid-points", c.grid_points, "Evaluation points per replication")->capture_default_str();
    app.add_option("--oracle-draws", c.oracle_draws, "Draws for the ground-truth oracle")->capture_default_str();
    app.add_option("--include-mean", c.include_mean, "Include the mean target (1) or not (0)")->capture_default_str();

    app.add_option("--threads", c.threads, "Worker threads (0: NPMV_THREADS or hardware)")->capture_default_str();
    app.add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
}

std::string option_key(const std::string& token) {
    if (token.rfind("--", 0) != 0) return {};
    const auto eq = token.find('=');
    return token.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
}

/// Expands `--manifest FILE` into the recorded command and configuration.
std::vector<std::string> expand_manifest(const std::vector<std::string>& args) {
    std::optional<std::string> manifest;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--manifest") {
            if (i + 1 >= args.size()) throw UsageError("--manifest needs a file");
            manifest = args[++i];
        } else if (args[i].rfind("--manifest=", 0) == 0) {
            manifest = args[i].substr(11);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!manifest) return args;
    for (const auto& a : rest) {
        if (std::find(kCommands.begin(), kCommands.end(), a) != kCommands.end()) {
            throw UsageError("--manifest supplies the command; do not name one");
        }
    }
    std::set<std::string> explicit_keys;
    for (const auto& a : rest) {
        if (const std::string k = option_key(a); !k.empty()) explicit_keys.insert(k);
    }
    std::vector<std::string> out = manifest_to_args(*manifest, explicit_keys);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

void report_error(std::ostream& err, const std::string& category, const std::string& message) {
    err << "npmv-error category=" << category << '\n' << "npmv: " << message << '\n';
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Nonparametric multivariate conditional mean, covariance and geometric quantiles", "npmv"};
    app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
    std::string manifest_help;
    app.add_option("--manifest", manifest_help, "Re-run the command recorded in a manifest.json");
    add_options(app, cfg);
    app.require_subcommand(0, 1);
    app.allow_config_extras(CLI::config_extras_mode::error);
    const std::map<std::string, std::string> descriptions{
        {"fit-mean", "Conditional mean with simultaneous confidence bands"},
        {"fit-cov", "Conditional covariance and generalized variance"},
        {"fit-quantile", "Conditional geometric quantiles with a non-crossing report"},
        {"var", "Conditional value-at-risk series"},
        {"simulate", "Monte Carlo RMSE / relative MAPE report"},
        {"replay", "Full pipeline on price and risk-index files"},
        {"select-bandwidth", "Blocked cross-validation for the mean bandwidth"}};
    for (const auto& name : kCommands) {
        app.add_subcommand(name, descriptions.at(name))->fallthrough();
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        std::vector<std::string> args = expand_manifest(raw_args);
        std::vector<const char*> argv{"npmv"};
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) {
                app.exit(e, out, err);
                return kExitOk;
            }
            report_error(err, "usage", e.what());
            err << "Run with --help for usage.\n";
            return kExitUsage;
        }
        if (app.get_subcommands().empty()) {
            report_error(err, "usage", "no command given (one of fit-mean, fit-cov, fit-quantile, var, simulate, "
                                       "replay, select-bandwidth)");
            return kExitUsage;
        }
        cfg.command = app.get_subcommands().front()->get_name();
        validate(cfg);
        Run run(cfg, out);
        dispatch(cfg, run, out);
        run.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        return kExitOk;
    } catch (const UsageError& e) {
        report_error(err, "usage", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        report_error(err, e.category(), e.what());
        return kExitFailure;
    } catch (const std::invalid_argument& e) {
        report_error(err, "invalid-argument", e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        report_error(err, "runtime", e.what());
        return kExitFailure;
    }
}

}  // namespace npmv::cli
