// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   npmv_acceptance [--work-dir DIR] [--only AC1,AC4,...]

#include "cli.hpp"
#include "npmv/npmv.hpp"
#include "oracles.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace npmv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_work = "acceptance_work";
const std::string kFixtures = NPMV_FIXTURE_DIR;

std::string fmt(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

// ------------------------------------------------------------ AC1 / AC2

struct McRun {
    bool ok = false;
    std::string error;
    std::map<std::tuple<std::string, std::string, std::size_t>, double> rmse;  // (dist, target, n)
};

const McRun& default_simulation() {
    static McRun run = [] {
        McRun r;
        const fs::path dir = g_work / "simulate_defaults";
        fs::remove_all(dir);
        fs::create_directories(dir);
        if (run_cli({"simulate", "--out-dir", dir.string()}) != 0) {
            r.error = "simulate exited nonzero";
            return r;
        }
        std::ifstream in(dir / "mc_report.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string n, dist, target, rmse;
            std::getline(ss, n, ',');
            std::getline(ss, dist, ',');
            std::getline(ss, target, ',');
            std::getline(ss, rmse, ',');
            r.rmse[{dist, target, std::stoul(n)}] = rmse == "NA" ? std::nan("") : std::stod(rmse);
        }
        r.ok = true;
        return r;
    }();
    return run;
}

Outcome ac1() {
    const McRun& mc = default_simulation();
    if (!mc.ok) return {false, mc.error};
    const std::vector<std::size_t> sizes{100, 500, 1000};
    const std::vector<double> reference{0.259, 0.141, 0.111};
    std::vector<double> got;
    for (const auto n : sizes) got.push_back(mc.rmse.at({"normal", "mean", n}));
    bool pass = got[0] > got[1] && got[1] > got[2];
    for (std::size_t i = 0; i < 3; ++i) pass = pass && std::abs(got[i] - reference[i]) <= 0.4 * reference[i];
    return {pass, "normal mean RMSE " + fmt(got[0]) + " / " + fmt(got[1]) + " / " + fmt(got[2]) +
                      " vs 0.259 / 0.141 / 0.111 (+-40%)"};
}

Outcome ac2() {
    const McRun& mc = default_simulation();
    if (!mc.ok) return {false, mc.error};
    bool pass = true;
    std::string bad;
    for (const std::string target : {"quantile-0.05", "quantile-0.5", "quantile-0.95"}) {
        for (const std::string dist : {"normal", "t3", "exponential"}) {
            const double a = mc.rmse.at({dist, target, 100});
            const double b = mc.rmse.at({dist, target, 500});
            const double c = mc.rmse.at({dist, target, 1000});
            if (!(a > b && b > c)) {
                pass = false;
                bad += " " + dist + "/" + target + "(" + fmt(a) + "," + fmt(b) + "," + fmt(c) + ")";
            }
        }
        const double t3 = mc.rmse.at({"t3", target, 100});
        const double normal = mc.rmse.at({"normal", target, 100});
        if (!(t3 > normal)) {
            pass = false;
            bad += " t3<=normal@" + target;
        }
    }
    const std::string summary = "t3 vs normal at n=100, tau=0.05: " + fmt(mc.rmse.at({"t3", "quantile-0.05", 100})) +
                                " vs " + fmt(mc.rmse.at({"normal", "quantile-0.05", 100}));
    return {pass, pass ? "9 groups decrease in n; " + summary : "violations:" + bad};
}

// ------------------------------------------------------------ AC3 / AC4 / AC5

Eigen::VectorXd random_direction(std::mt19937_64& rng, Eigen::Index p, double max_norm) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> r(0.0, max_norm);
    Eigen::VectorXd u(p);
    for (Eigen::Index j = 0; j < p; ++j) u(j) = g(rng);
    return u.normalized() * r(rng);
}

/// Kernel-weighted cloud around a random interior point of a random sample.
WeightedCloud random_local_cloud(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.5, 3.0);
    while (true) {
        Eigen::MatrixXd y(n, p), x(n, 1);
        for (Eigen::Index t = 0; t < n; ++t) {
            x(t, 0) = g(rng);
            for (Eigen::Index j = 0; j < p; ++j) y(t, j) = scale(rng) * g(rng) + x(t, 0);
        }
        const Dataset d(y, x);
        const Eigen::VectorXd at = Eigen::VectorXd::Constant(1, 0.5 * g(rng));
        try {
            WeightedCloud c = local_cloud(d, at, KernelSpec(KernelFamily::Epanechnikov, 1), Bandwidth(1.5));
            if (c.points.rows() >= 2) return c;
        } catch (const EmptyNeighborhoodError&) {
        }
    }
}

Outcome ac3() {
    std::mt19937_64 rng(3003);
    std::uniform_int_distribution<int> size(2, 50), dim(1, 3);
    int converged = 0, descent_violations = 0, foc_violations = 0;
    double worst_rise = 0.0, worst_foc = 0.0;
    for (int f = 0; f < 1000; ++f) {
        const WeightedCloud c = random_local_cloud(rng, size(rng), dim(rng));
        const Eigen::VectorXd u = random_direction(rng, c.dim(), 0.95);
        const QuantileEstimate est = estimate_quantile(c, u, IrlsConfig{});
        for (std::size_t i = 1; i < est.objective_trace.size(); ++i) {
            const double prev = est.objective_trace[i - 1];
            const double rise = est.objective_trace[i] - prev;
            worst_rise = std::max(worst_rise, rise);
            if (rise > 1e-12 * std::max(1.0, std::abs(prev))) ++descent_violations;
        }
        if (est.converged) {
            ++converged;
            worst_foc = std::max(worst_foc, est.foc_residual_norm);
            if (!(est.foc_residual_norm <= 1e-6)) ++foc_violations;
        }
    }
    const bool pass = descent_violations == 0 && foc_violations == 0;
    return {pass, "1000 fixtures: " + std::to_string(descent_violations) + " descent violations (max rise " +
                      sci(worst_rise) + "), " + std::to_string(converged) + " converged, max FOC " + sci(worst_foc)};
}

Outcome ac4() {
    std::mt19937_64 rng(4004);
    std::uniform_int_distribution<int> size(2, 30), dim(1, 2);
    int quantile_fail = 0;
    double worst_q = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const WeightedCloud c = random_local_cloud(rng, size(rng), dim(rng));
        const Eigen::VectorXd u = random_direction(rng, c.dim(), 0.9);
        const Eigen::VectorXd est = estimate_quantile(c, u, IrlsConfig{}).q;
        const Eigen::VectorXd lo = c.points.colwise().minCoeff().transpose();
        const Eigen::VectorXd hi = c.points.colwise().maxCoeff().transpose();
        const Eigen::VectorXd pad = (hi - lo).cwiseMax(1.0);
        const Eigen::VectorXd ref = oracle::nested_grid_min(
            [&](const Eigen::VectorXd& q) { return oracle::geo_objective(c.points, c.weights, u, q); },
            lo - 2.0 * pad, hi + 2.0 * pad);
        const double err = (est - ref).norm();
        worst_q = std::max(worst_q, err);
        if (!(err <= 1e-3)) ++quantile_fail;
    }

    std::uniform_int_distribution<int> small(2, 20), resp(1, 3), cov(1, 2);
    std::normal_distribution<double> g(0.0, 1.0);
    int smoother_fail = 0, checked = 0;
    double worst_mean = 0.0, worst_cov = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const Eigen::Index n = small(rng), p = resp(rng), k = cov(rng);
        Eigen::MatrixXd y(n, p), x(n, k);
        for (Eigen::Index t = 0; t < n; ++t) {
            for (Eigen::Index j = 0; j < p; ++j) y(t, j) = g(rng);
            for (Eigen::Index j = 0; j < k; ++j) x(t, j) = g(rng);
        }
        const Dataset d(y, x);
        const KernelSpec spec(KernelFamily::Epanechnikov, static_cast<int>(k));
        const Eigen::VectorXd at = d.standardized().row(inst % n).transpose();
        const double b = 1.2 + 0.1 * (inst % 5);
        const Eigen::VectorXd m = estimate_mean(d, at, spec, Bandwidth(b)).point;
        const Eigen::MatrixXd s = estimate_cov(d, at, spec, Bandwidth(b), Bandwidth(b)).matrix;
        const double em = (m - oracle::nw_mean(d.standardized(), y, at, b)).cwiseAbs().maxCoeff();
        const double es = (s - oracle::nw_cov(d.standardized(), y, at, b, b)).cwiseAbs().maxCoeff();
        worst_mean = std::max(worst_mean, em);
        worst_cov = std::max(worst_cov, es);
        if (!(em <= 1e-12 && es <= 1e-12)) ++smoother_fail;
        ++checked;
    }
    const bool pass = quantile_fail == 0 && smoother_fail == 0;
    return {pass, "quantile vs nested grid: " + std::to_string(100 - quantile_fail) + "/100 within 1e-3 (max " +
                      sci(worst_q) + "); NW mean/cov vs direct loops: " + std::to_string(checked - smoother_fail) +
                      "/" + std::to_string(checked) + " within 1e-12 (max " + sci(std::max(worst_mean, worst_cov)) +
                      ")"};
}

Outcome ac5() {
    const std::vector<double> levels{0.05, 0.5, 0.95};
    std::normal_distribution<double> g(0.0, 1.0);
    int failures = 0;
    double min_sep = std::numeric_limits<double>::infinity();
    for (int f = 0; f < 50; ++f) {
        const std::uint64_t seed = 5005 + 1000 * static_cast<std::uint64_t>(f);
        Dataset d = [&] {
            if (f % 2 == 0) {
                SimConfig cfg;
                cfg.n = 300;
                cfg.seed = seed;
                cfg.error_dist = static_cast<ErrorDist>(f / 2 % 3);
                return simulate_dataset(cfg);
            }
            std::mt19937_64 rng(seed);
            Eigen::MatrixXd y(200, 1), x(200, 1);
            for (Eigen::Index t = 0; t < 200; ++t) {
                x(t, 0) = g(rng);
                y(t, 0) = std::sin(x(t, 0)) + (0.5 + 0.25 * x(t, 0) * x(t, 0)) * g(rng);
            }
            return Dataset(y, x);
        }();
        const KernelSpec spec(KernelFamily::Epanechnikov, static_cast<int>(d.k()));
        const Eigen::VectorXd at = Eigen::VectorXd::Zero(d.k());
        const NoncrossingReport rep = check_noncrossing(d, at, spec, Bandwidth(1.0), levels);
        bool ok = rep.ok;
        for (Eigen::Index i = 0; i < 3; ++i) {
            for (Eigen::Index j = i + 1; j < 3; ++j) min_sep = std::min(min_sep, rep.distances(i, j));
        }
        if (d.p() == 1) {
            ok = ok && rep.estimates[0].q(0) < rep.estimates[1].q(0) && rep.estimates[1].q(0) < rep.estimates[2].q(0);
        }
        failures += !ok;
    }
    return {failures == 0, std::to_string(50 - failures) + "/50 fixtures separated (25 with p=2, 25 with p=1 " +
                               "strictly increasing); min separation " + sci(min_sep)};
}

// ------------------------------------------------------------ AC6

Outcome ac6() {
    const KernelSpec spec(KernelFamily::Epanechnikov, 3);
    long covered = 0, total = 0;
    double b_sum = 0.0;
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
        SimConfig cfg;
        cfg.n = 1000;
        cfg.seed = replication_seed(6006, rep);
        const Dataset d = simulate_dataset(cfg);
        const Bandwidth b = blocked_cv_bandwidth(d, spec).selected;
        b_sum += b.value();
        const Eigen::MatrixXd fits = fitted_means(d, spec, b);
        for (const Eigen::Index row : central_grid_rows(d, 25, derive_seed(cfg.seed, sim_stream::kGrid))) {
            const Eigen::VectorXd z = d.standardized().row(row).transpose();
            const Eigen::Vector2d truth = regression_function(d.covariates().row(row).transpose(), cfg.b_coeffs);
            bool all = true;
            const auto bands = basis_bands(d, z, spec, b, 0.05, fits);
            for (int j = 0; j < 2; ++j) all = all && bands[j].low() <= truth(j) && truth(j) <= bands[j].high();
            covered += all;
            ++total;
        }
    }
    const double coverage = static_cast<double>(covered) / static_cast<double>(total);
    return {coverage >= 0.90 && coverage <= 0.99,
            "simultaneous basis-contrast coverage " + fmt(coverage) + " over 200 replications x 25 interior points" +
                " (mean CV bandwidth " + fmt(b_sum / 200.0, 2) + ")"};
}

// ------------------------------------------------------------ AC7 / AC8

Outcome ac7() {
    std::mt19937_64 rng(7007);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd y(10000, 1);
    for (Eigen::Index t = 0; t < y.rows(); ++t) y(t, 0) = -g(rng);  // losses L = -Y are standard normal
    const Dataset d(y, Eigen::MatrixXd::Zero(10000, 1));
    const VarEstimate v = var_estimate(d, Eigen::VectorXd::Zero(1), KernelSpec(KernelFamily::Epanechnikov, 1),
                                       Bandwidth(1.0), 0.95);
    const double target = oracle::normal_quantile(0.95);
    return {std::abs(v.value(0) - target) <= 0.10,
            "VaR_0.95 = " + fmt(v.value(0), 4) + " vs inverse-CDF " + fmt(target, 4) + " (+-0.10)"};
}

Outcome ac8() {
    bool pass = true;
    std::string detail = "normalization";
    for (int k = 1; k <= 3; ++k) {
        const int m = k == 1 ? 20000 : (k == 2 ? 1000 : 150);
        for (const auto family : {KernelFamily::Epanechnikov, KernelFamily::Gaussian}) {
            const KernelSpec spec(family, k);
            const double mass = oracle::cube_integral([&](const Eigen::VectorXd& u) { return kernel_eval(spec, u); },
                                                      k, family == KernelFamily::Gaussian ? 8.0 : 1.0, m);
            pass = pass && std::abs(mass - 1.0) <= 1e-3;
            detail += " " + to_string(family).substr(0, 3) + std::to_string(k) + "=" + fmt(mass, 5);
        }
    }
    const auto c = kernel_constants(KernelSpec(KernelFamily::Epanechnikov, 1));
    pass = pass && std::abs(c.phi_K - 0.6) <= 1e-6 && std::abs(c.psi_K - 0.1) <= 1e-6;
    return {pass, detail + "; Epanechnikov k=1 phi=" + fmt(c.phi_K, 9) + " psi=" + fmt(c.psi_K, 9)};
}

// ------------------------------------------------------------ AC9

std::string strip_wall_time(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.find("\"wall_time_seconds\"") == std::string::npos) out += line + '\n';
    }
    return out;
}

/// Compares every file of two output directories; the manifest is compared without its timing
/// field and with the output directory normalized.
bool same_outputs(const fs::path& a, const fs::path& b, std::string& why) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
    std::set<std::string> other;
    for (const auto& e : fs::directory_iterator(b)) other.insert(e.path().filename().string());
    if (names != other) {
        why = "file sets differ";
        return false;
    }
    for (const auto& name : names) {
        std::string x = slurp(a / name), y = slurp(b / name);
        if (name == "manifest.json") {
            x = strip_wall_time(x);
            y = strip_wall_time(y);
            const auto normalize = [](std::string& s, const std::string& from) {
                for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from)) s.replace(pos, from.size(), "<out>");
            };
            normalize(x, a.string());
            normalize(y, b.string());
        }
        if (x != y) {
            why = name + " differs between " + a.filename().string() + " and " + b.filename().string();
            return false;
        }
    }
    return true;
}

Outcome ac9() {
    const fs::path root = g_work / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"simulate",
         {"simulate", "--replications", "3", "--sample-sizes", "100,300", "--grid-points", "10", "--oracle-draws",
          "20000", "--seed", "99"}},
        {"replay",
         {"replay", "--prices-a", kFixtures + "/prices_a.csv", "--prices-b", kFixtures + "/prices_b.csv", "--risk",
          kFixtures + "/risk.csv"}}};
    std::string detail;
    for (const auto& [name, args] : runs) {
        const fs::path first = root / (name + "_1"), second = root / (name + "_2"), rerun = root / (name + "_manifest");
        auto with_out = [&](const fs::path& dir) {
            std::vector<std::string> a = args;
            a.insert(a.end(), {"--out-dir", dir.string()});
            return a;
        };
        if (run_cli(with_out(first)) != 0 || run_cli(with_out(second)) != 0 ||
            run_cli({"--manifest", (first / "manifest.json").string(), "--out-dir", rerun.string()}) != 0) {
            return {false, name + " run exited nonzero"};
        }
        std::string why;
        if (!same_outputs(first, second, why) || !same_outputs(first, rerun, why)) return {false, why};
        std::size_t files = 0;
        for ([[maybe_unused]] const auto& e : fs::directory_iterator(first)) ++files;
        detail += (detail.empty() ? "" : "; ") + name + ": " + std::to_string(files) +
                  " files identical across repeat and manifest rerun";
    }
    return {true, detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work-dir" && i + 1 < argc) {
            g_work = argv[++i];
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string id; std::getline(ss, id, ',');) only.insert(id);
        } else {
            std::cerr << "usage: npmv_acceptance [--work-dir DIR] [--only AC1,AC2,...]\n";
            return 2;
        }
    }
    fs::create_directories(g_work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
        {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}};
    int failed = 0;
    for (const auto& [id, check] : criteria) {
        if (!only.empty() && !only.contains(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << fmt(secs, 1) << " s]"
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
