// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// Every experiment runs at its bundled default config with seed 1.

#include "qpde/commands.hpp"
#include "qpde/config.hpp"
#include "qpde/verify.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace qpde;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string list(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : "/") + fmt(x);
    return s;
}

const fs::path kWork = fs::temp_directory_path() / "qpde_acceptance";

struct Run {
    int code = -1;
    fs::path dir;
    nlohmann::json status;
    double seconds = 0.0;
};

Run solve(const std::string& tag) {
    ExperimentConfig cfg = load_config(fs::path(QPDE_CONFIG_DIR) / (tag + ".default.ini"));
    cfg.run.seed = 1;
    cfg.run.out = (kWork / tag).string();
    fs::remove_all(cfg.run.out);
    Run r;
    r.dir = cfg.run.out;
    std::ostringstream log;
    const auto t0 = std::chrono::steady_clock::now();
    r.code = cmd_solve(cfg, log);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ifstream is(r.dir / "status.json");
    if (is) r.status = nlohmann::json::parse(is);
    return r;
}

std::string timing(const Run& r) { return ", " + fmt(r.seconds) + " s"; }

double num(const nlohmann::json& j, const char* key) { return j.contains(key) ? j[key].get<double>() : NAN; }

void one_d(const Run& r) {
    const double err = num(r.status, "final_err");
    const double rel = r.status.contains("error") ? r.status["error"]["max_rel"].get<double>() : NAN;
    report("1d.experiment", r.code == kExitOk && err < 1e-4 && rel < 0.01,
           "err " + fmt(err) + " (< 1e-4) after " + std::to_string(r.status.value("steps", 0)) +
               " steps, max rel err " + fmt(rel) + " (< 0.01) on 201 points" + timing(r));
}

void two_d(const Run& r) {
    const double err = num(r.status, "final_err");
    const double sup = r.status.contains("error") ? r.status["error"]["sup"].get<double>() : NAN;
    double q0 = NAN;
    if (fs::exists(r.dir / "checkpoints/final.ckpt")) {
        const Checkpoint ck = load_checkpoint(r.dir / "checkpoints/final.ckpt");
        q0 = q_bundle(ck.params, Domain::unit_ball(2), BoundaryData{}, Point::Zero(2)).value;
    }
    const double u0 = ExactSolution(Problem::bm2d, 1.0).value(Point::Zero(2));
    const bool ok = r.code == kExitOk && err < 1e-3 && sup < 5e-3 && std::abs(u0 - 0.36147) < 5e-3 &&
                    std::abs(q0 - 0.36147) < 5e-3;
    report("2d.experiment", ok,
           "err " + fmt(err) + " (< 1e-3), sup err " + fmt(sup) + " (< 5e-3) on 1000 points, Q(0) " + fmt(q0) +
               " u(0) " + fmt(u0) + " (0.36147 +- 5e-3)" + timing(r));
}

void six_d(const Run& r) {
    const double e0 = num(r.status, "initial_err"), e1 = num(r.status, "final_err");
    std::vector<double> mse;
    bool shells_ok = r.status.contains("error") && r.status["error"].contains("shells") &&
                     r.status["error"]["shells"].size() == 5;
    if (shells_ok)
        for (const auto& s : r.status["error"]["shells"]) mse.push_back(s["mse"].get<double>());
    const bool ok = (r.code == kExitOk || r.code == kExitBudget) && e0 / e1 >= 100.0 && shells_ok &&
                    std::all_of(mse.begin(), mse.end(), [](double m) { return m < 1e-3; });
    report("6d.experiment", ok,
           "loss " + fmt(e0) + " -> " + fmt(e1) + " (ratio " + fmt(e0 / e1) + " >= 100), shell MSE at r = " +
               "0/.25/.5/.75/.95: " + list(mse) + " (< 1e-3)" + timing(r));
}

void boundary_pinning(const std::vector<Run>& runs) {
    double worst = 0.0;
    std::size_t count = 0;
    for (const Run& r : runs) {
        if (!fs::exists(r.dir / "checkpoints")) {
            worst = INFINITY;
            continue;
        }
        for (const auto& entry : fs::directory_iterator(r.dir / "checkpoints")) {
            const Checkpoint ck = load_checkpoint(entry.path());
            const Domain d = Domain::unit_ball(static_cast<int>(ck.params.dim()));
            worst = std::max(worst, boundary_deviation(ck.params, d, BoundaryData{}, 500, 1000 + count));
            ++count;
        }
    }
    report("boundary.pinning", count > 0 && worst <= 1e-12,
           "max |Q - f| " + fmt(worst) + " (<= 1e-12) over " + std::to_string(count) +
               " checkpoints x 500 sphere points");
}

void check_group(const std::string& name, const std::vector<CheckResult>& results) {
    bool ok = !results.empty();
    std::string detail;
    for (const CheckResult& r : results) {
        ok = ok && r.passed;
        if (!r.passed) detail += " failed:" + r.name;
    }
    std::string worst;
    for (const CheckResult& r : results) worst += (worst.empty() ? "" : ", ") + r.name + " " + fmt(r.measured);
    report(name, ok, std::to_string(results.size()) + " checks; " + worst + detail);
}

void kernel_suite() {
    double worst_psd = 0.0, worst_asym = 0.0, worst_b = 0.0;
    bool psd_ok = true;
    Stream s(11);
    for (int dim : {1, 2, 6}) {
        for (Eigen::Index N : {8, 64, 512}) {
            InitSpec spec;
            spec.seed = 100 + static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(dim);
            const NetworkParams p = init_params(spec, N, dim);
            PointSet X = sample_interior(BallDomain(dim), 40, s);
            const PointSet edge = sample_sphere(BallDomain(dim), 1.0, 10, s);
            const Domain domain = Domain::unit_ball(dim);
            const KernelMatrix A = ntk_kernel(p, X, X);
            const KernelMatrix W = windowed(A, domain);
            for (const Matrix* K : {&A.value, &W.value}) {
                const SpectrumSummary sp = gram_spectrum(*K);
                psd_ok = psd_ok && sp.min_eig >= -1e-10 * sp.trace && sp.asymmetry <= 1e-12;
                worst_psd = std::min(worst_psd, sp.min_eig / sp.trace);
                worst_asym = std::max(worst_asym, sp.asymmetry);
            }
            X.insert(X.end(), edge.begin(), edge.end());
            const KernelMatrix B = windowed(ntk_kernel(p, X, X, 2), domain);
            for (Eigen::Index i = 40; i < 50; ++i) {
                worst_b = std::max(worst_b, B.value.row(i).cwiseAbs().maxCoeff());
                worst_b = std::max(worst_b, B.value.col(i).cwiseAbs().maxCoeff());
            }
        }
    }
    report("kernel.gram_psd", psd_ok,
           "min eig / trace " + fmt(worst_psd) + " (>= -1e-10), asymmetry " + fmt(worst_asym) +
               ", N in {8,64,512} x dims {1,2,6}");
    report("kernel.boundary_vanishing", worst_b <= 1e-12, "max |B(x, y)| with x on the sphere " + fmt(worst_b));

    ExperimentConfig cfg = ExperimentConfig::defaults_for("bm1d");
    const auto med = medians_by_width(drift_experiment(cfg), &DriftRow::sup);
    std::vector<double> m;
    for (const auto& [w, v] : med) m.push_back(v);
    const bool decreasing = m.size() == 3 && m[0] > m[1] && m[1] > m[2];
    report("kernel.drift_trend", decreasing,
           "median sup H at N = 64/256/1024 (5 seeds, " + std::to_string(cfg.diagnostics.drift_steps) +
               " steps): " + list(m) + " (strictly decreasing)");
}

void limit_suite() {
    // L = 0: the field never moves.
    {
        InitSpec spec;
        spec.seed = 1;
        const Domain d = Domain::unit_ball(2);
        Stream s(1);
        LimitState st = make_limit_state(d, sample_interior(BallDomain(2), 50, s), spec, 500);
        const LimitProblem lp{d, BoundaryData{}, zero_operator()};
        const PointSet probe = sample_interior(BallDomain(2), 20, s);
        const Vector before = limit_q_values(st, lp, probe);
        LimitOptions o;
        o.h = 0.25;
        o.steps = 100;
        limit_ode_integrate(st, lp, o);
        const double moved = (limit_q_values(st, lp, probe) - before).cwiseAbs().maxCoeff();
        report("limit.zero_operator", moved == 0.0, "max change of Q over 100 steps " + fmt(moved));
    }

    // bm1d trajectory at the default limit config, shortened to t = 100.
    ExperimentConfig cfg = ExperimentConfig::defaults_for("bm1d");
    cfg.limit.steps = 400;
    cfg.run.out = (kWork / "limit").string();
    fs::remove_all(cfg.run.out);
    std::ostringstream log;
    const int code = cmd_limit(cfg, log);
    std::vector<double> t, e2, b;
    {
        std::ifstream is(fs::path(cfg.run.out) / "trajectory.csv");
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
            double tt, r, l2, bb;
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &tt, &r, &l2, &bb) != 4) continue;
            t.push_back(tt);
            e2.push_back(l2 * l2);
            b.push_back(bb);
        }
    }
    const bool have = code == kExitOk && t.size() >= 10;
    // Running average (1/t) int_0^t |Q_s - u|^2 ds by the trapezoid rule;
    // burn-in is the first tenth of the horizon.
    bool avg_ok = have;
    double integral = 0.0, prev = INFINITY;
    std::size_t increases = 0;
    for (std::size_t k = 1; have && k < t.size(); ++k) {
        integral += 0.5 * (e2[k] + e2[k - 1]) * (t[k] - t[k - 1]);
        const double avg = integral / t[k];
        if (t[k] >= 0.1 * t.back() && avg > prev) ++increases;
        prev = avg;
    }
    avg_ok = avg_ok && increases == 0;
    const double ratio = have ? std::sqrt(e2.back() / e2.front()) : NAN;
    report("limit.time_average", avg_ok && ratio < 0.1,
           "running average increases after burn-in: " + std::to_string(increases) + ", final/initial L2 " +
               fmt(ratio) + " (< 0.1), t = " + (have ? fmt(t.back()) : std::string("?")));

    // Increments of int |B_hat L Q_s|^2 ds: the last window against the first.
    double first = NAN, last = NAN;
    if (have) {
        first = 0.5 * (b[0] + b[1]) * (t[1] - t[0]);
        const std::size_t n = t.size();
        last = 0.5 * (b[n - 1] + b[n - 2]) * (t[n - 1] - t[n - 2]);
    }
    report("limit.b_increments", have && last < 1e-6 * first,
           "first increment " + fmt(first) + ", last " + fmt(last) + " (ratio < 1e-6)");

    // Paired network-vs-limit comparison on a short horizon with many seeds.
    ExperimentConfig pc = ExperimentConfig::defaults_for("bm1d");
    pc.limit.features = 40000;
    pc.limit.quad_points = 100;
    pc.limit.steps = 40;
    pc.limit.diagnostics_every = 10;
    const auto t0 = std::chrono::steady_clock::now();
    const auto med = medians_by_width(paired_comparison(pc), &ComparisonRow::sup_diff);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<double> m;
    for (const auto& [w, v] : med) m.push_back(v);
    bool decreasing = m.size() == 4;
    for (std::size_t i = 1; decreasing && i < m.size(); ++i) decreasing = m[i] < m[i - 1];
    report("limit.paired_trend", decreasing,
           "median sup |Q^N - Q| at N = 512/1024/2048/4096 (" + std::to_string(pc.limit.compare_seeds.size()) +
               " seeds): " + list(m) + " (strictly decreasing), " + fmt(secs) + " s");
}

}  // namespace

int main() {
    fs::create_directories(kWork);
    VerifyOptions opts;

    const Run r1 = solve("bm1d");
    one_d(r1);
    const Run r2 = solve("bm2d");
    two_d(r2);
    const Run r6 = solve("bm6d");
    six_d(r6);

    check_group("gradient.suite", {check_param_gradient(opts), check_spatial_gradient(opts),
                                   check_spatial_hessian(opts), check_kernel_derivatives(opts)});
    check_group("oracle.consistency", check_oracle_residuals(opts));
    boundary_pinning({r1, r2, r6});
    check_group("truncation.laws", check_truncation_laws(opts));
    kernel_suite();
    limit_suite();

    std::vector<CheckResult> mono = check_gamma_star(opts);
    mono.push_back(check_monotonicity_model(opts));
    mono.push_back(check_monotonicity_falsification(opts));
    check_group("monotonicity.suite", mono);

    std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
