#include "qpde/commands.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace qpde {

namespace fs = std::filesystem;

std::uint64_t derived_seed(std::uint64_t seed, SeedSlot slot) {
    return Stream(seed).split(static_cast<std::uint64_t>(slot)).seed();
}

Domain make_domain(const ExperimentConfig& cfg) { return Domain::unit_ball(problem_dim(parse_problem(cfg.problem.tag))); }

Operator make_problem_operator(const ExperimentConfig& cfg) {
    const auto& p = cfg.problem;
    if (p.op == "model_bm") return model_bm(p.gamma);
    if (p.op != "linear_generator") throw ConfigError("problem.operator: unknown operator '" + p.op + "'");
    const int n = problem_dim(parse_problem(p.tag));
    LinearGenerator gen;
    gen.drift = [s = p.drift_scale](const Point& x) -> Vector { return s * x; };
    gen.drift_jacobian = [s = p.drift_scale, n](const Point&) -> Matrix { return s * Matrix::Identity(n, n); };
    gen.diffusion = [d = p.diffusion, n](const Point&) -> Matrix { return d * Matrix::Identity(n, n); };
    gen.source = [r = p.source](const Point&) { return r; };
    gen.gamma = p.gamma;
    return make_operator(gen);
}

TrainingProblem make_training_problem(const ExperimentConfig& cfg) {
    const TruncationMode mode = parse_truncation_mode(cfg.truncation.mode);
    Truncation trunc = mode == TruncationMode::identity
                           ? Truncation::identity()
                           : Truncation(mode, resolved_delta(cfg), static_cast<double>(cfg.network.width));
    return TrainingProblem{make_domain(cfg), BoundaryData{}, make_problem_operator(cfg), trunc};
}

LimitProblem make_limit_problem(const ExperimentConfig& cfg) {
    return LimitProblem{make_domain(cfg), BoundaryData{}, make_problem_operator(cfg)};
}

TrainerConfig make_trainer_config(const ExperimentConfig& cfg) {
    TrainerConfig t;
    t.alpha = cfg.trainer.alpha;
    t.step_size = cfg.trainer.step_size;
    t.batch = cfg.trainer.batch;
    t.max_steps = cfg.trainer.max_steps;
    t.tolerance = cfg.trainer.tolerance;
    t.seed = derived_seed(cfg.run.seed, SeedSlot::trainer);
    t.resample_each_step = cfg.trainer.resample_each_step;
    t.telemetry_every = cfg.trainer.telemetry_every;
    t.checkpoint_every = cfg.trainer.checkpoint_every;
    t.discretized_form_factor = cfg.trainer.discretized_form_factor;
    t.threads = cfg.run.threads;
    return t;
}

InitSpec make_init_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
    return InitSpec{cfg.network.c_bound, cfg.network.w_std, cfg.network.b_std, seed};
}

NetworkParams make_initial_params(const ExperimentConfig& cfg, std::size_t width, std::uint64_t seed) {
    return init_params(make_init_spec(cfg, derived_seed(seed, SeedSlot::init)), static_cast<Eigen::Index>(width),
                       problem_dim(parse_problem(cfg.problem.tag)), cfg.network.beta,
                       parse_activation(cfg.network.activation), cfg.network.allow_nontheoretical_beta);
}

std::optional<ExactSolution> reference_solution(const ExperimentConfig& cfg) {
    if (cfg.problem.op != "model_bm") return std::nullopt;
    return ExactSolution(parse_problem(cfg.problem.tag), cfg.problem.gamma);
}

GridSpec make_grid(const ExperimentConfig& cfg) {
    const auto& d = cfg.diagnostics;
    std::string kind = d.grid;
    if (kind == "auto") {
        const int n = problem_dim(parse_problem(cfg.problem.tag));
        kind = n == 1 ? "uniform_1d" : n == 2 ? "random" : "radial";
    }
    GridSpec g;
    g.kind = kind == "uniform_1d" ? GridSpec::Kind::uniform_1d
             : kind == "random"   ? GridSpec::Kind::random
                                  : GridSpec::Kind::radial;
    g.lo = d.grid_lo;
    g.hi = d.grid_hi;
    g.points = d.grid_points;
    g.shells = d.shells;
    g.points_per_shell = d.shell_points;
    g.seed = derived_seed(cfg.run.seed, SeedSlot::report);
    return g;
}

double boundary_deviation(const NetworkParams& params, const Domain& domain, const BoundaryData& boundary,
                          std::size_t m, std::uint64_t seed) {
    Stream stream(seed);
    const PointSet pts = sample_sphere(BallDomain(domain.dim()), 1.0, m, stream);
    double worst = 0.0;
    for (const Point& x : pts)
        worst = std::max(worst, std::abs(q_bundle(params, domain, boundary, x).value - boundary(x).value));
    return worst;
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

/// config.ini and VERSION; returns the run directory.
fs::path prepare_run_dir(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.run.out);
    fs::create_directories(dir);
    {
        auto os = open_out(dir / "config.ini");
        write_config(os, cfg);
    }
    auto os = open_out(dir / "VERSION");
    os << QPDE_VERSION << '\n';
    return dir;
}

void write_status(const fs::path& dir, const nlohmann::ordered_json& status) {
    auto os = open_out(dir / "status.json");
    os << status.dump(2) << '\n';
}

nlohmann::ordered_json status_header(const ExperimentConfig& cfg, const std::string& command) {
    nlohmann::ordered_json s;
    s["command"] = command;
    s["version"] = QPDE_VERSION;
    s["seed"] = cfg.run.seed;
    s["problem"] = cfg.problem.tag;
    return s;
}

/// Runs `body`; on an exception records it in status.json and returns kExitError.
template <class Body>
int guarded(const ExperimentConfig& cfg, const std::string& command, std::ostream& log, Body&& body) {
    fs::path dir;
    try {
        validate_config(cfg);
        dir = prepare_run_dir(cfg);
        return body(dir);
    } catch (const std::exception& e) {
        log << command << ": " << e.what() << '\n';
        if (!dir.empty()) {
            auto s = status_header(cfg, command);
            s["status"] = "error";
            s["message"] = e.what();
            try {
                write_status(dir, s);
            } catch (...) {
            }
        }
        return kExitError;
    }
}

std::string step_name(std::size_t step) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "step_%08zu.ckpt", step);
    return buf;
}

double rms_error(const Vector& q, const Vector& u) {
    return std::sqrt((q - u).squaredNorm() / static_cast<double>(q.size()));
}

Vector exact_values(const ExactSolution& sol, const PointSet& pts) {
    Vector u(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) u[static_cast<Eigen::Index>(i)] = sol.value(pts[i]);
    return u;
}

Vector network_values(const NetworkParams& params, const TrainingProblem& problem, const PointSet& pts) {
    Vector q(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        q[static_cast<Eigen::Index>(i)] = q_bundle(params, problem.domain, problem.boundary, pts[i]).value;
    return q;
}

constexpr std::size_t kValidationPoints = 200;
constexpr std::size_t kBoundaryPoints = 500;

}  // namespace

// -- solve -----------------------------------------------------------------------

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log) {
    return guarded(cfg, "solve", log, [&](const fs::path& dir) {
        const TrainingProblem problem = make_training_problem(cfg);
        const NetworkParams init = make_initial_params(cfg, cfg.network.width, cfg.run.seed);
        const auto exact = reference_solution(cfg);
        const fs::path ckpt_dir = dir / "checkpoints";
        fs::create_directories(ckpt_dir);
        save_checkpoint(ckpt_dir / step_name(0), Checkpoint{init, cfg.run.seed, 0});

        Trainer trainer(problem, make_trainer_config(cfg), init);
        trainer.set_record_wall_time(cfg.run.timing == "measured");
        trainer.set_checkpoint_sink([&](const NetworkParams& p, std::size_t step) {
            save_checkpoint(ckpt_dir / step_name(step), Checkpoint{p, cfg.run.seed, step});
        });
        if (exact) {
            Stream vs(derived_seed(cfg.run.seed, SeedSlot::validation));
            const PointSet vpts = problem.domain.sample(kValidationPoints, vs);
            const Vector u = exact_values(*exact, vpts);
            trainer.set_validator(
                [&problem, vpts, u](const NetworkParams& p) { return rms_error(network_values(p, problem, vpts), u); });
        }

        const TrainResult res = trainer.train();
        {
            auto os = open_out(dir / "telemetry.csv");
            write_telemetry_csv(os, res.telemetry);
        }
        save_checkpoint(ckpt_dir / "final.ckpt", Checkpoint{res.params, cfg.run.seed, res.steps});

        auto s = status_header(cfg, "solve");
        s["status"] = res.status == TrainStatus::converged ? "converged" : "step_budget";
        s["steps"] = res.steps;
        s["final_err"] = res.telemetry.back().err;
        s["initial_err"] = res.telemetry.front().err;
        s["boundary_max_abs_dev"] = boundary_deviation(res.params, problem.domain, problem.boundary, kBoundaryPoints,
                                                       derived_seed(cfg.run.seed, SeedSlot::boundary));
        if (exact) {
            const ScalarField q = [&](const Point& x) {
                return q_bundle(res.params, problem.domain, problem.boundary, x).value;
            };
            const GridSpec grid = make_grid(cfg);
            const ErrorReport rep = error_report(q, *exact, *problem.domain.ball(), grid);
            auto os = open_out(dir / "error_report.csv");
            write_error_csv(os, rep, grid);
            s["error"] = {{"l2", rep.l2}, {"sup", rep.sup}, {"max_rel", rep.max_rel}};
            if (!rep.shells.empty()) {
                nlohmann::ordered_json shells = nlohmann::ordered_json::array();
                for (const ShellError& sh : rep.shells) shells.push_back({{"r", sh.r}, {"mse", sh.mse}, {"e_r", sh.max_rel}});
                s["error"]["shells"] = shells;
            }
        }
        if (cfg.run.timing == "measured") s["wall_ms"] = res.telemetry.back().wall_ms;
        write_status(dir, s);
        log << "solve: " << s["status"].get<std::string>() << " after " << res.steps
            << " steps, err = " << fmt(res.telemetry.back().err) << '\n';
        return res.status == TrainStatus::converged ? kExitOk : kExitBudget;
    });
}

// -- limit -----------------------------------------------------------------------

namespace {

LimitState fresh_limit_state(const ExperimentConfig& cfg, const Domain& domain) {
    Stream qs(derived_seed(cfg.run.seed, SeedSlot::quadrature));
    PointSet quad = domain.sample(cfg.limit.quad_points, qs);
    return make_limit_state(domain, std::move(quad), make_init_spec(cfg, derived_seed(cfg.run.seed, SeedSlot::features)),
                            static_cast<Eigen::Index>(cfg.limit.features));
}

PointSet comparison_points(const ExperimentConfig& cfg, const Domain& domain) {
    Stream ts(derived_seed(cfg.run.seed, SeedSlot::validation));
    return domain.sample(cfg.limit.compare_test_points, ts);
}

}  // namespace

std::vector<ComparisonRow> paired_comparison(const ExperimentConfig& cfg) {
    const LimitProblem lp = make_limit_problem(cfg);
    LimitState state = fresh_limit_state(cfg, lp.domain);
    const PointSet test = comparison_points(cfg, lp.domain);
    const std::size_t every = cfg.limit.diagnostics_every;

    std::vector<Vector> limit_values;
    LimitOptions opts;
    opts.alpha = cfg.trainer.alpha;
    opts.h = cfg.limit.h;
    opts.steps = cfg.limit.steps;
    opts.diagnostics_every = every;
    opts.validator = [&](const LimitState& st) {
        limit_values.push_back(limit_q_values(st, lp, test));
        return 0.0;
    };
    const PointSet quad = state.quad;
    limit_ode_integrate(state, lp, opts);

    ExperimentConfig net_cfg = cfg;
    net_cfg.truncation.mode = "identity";
    const TrainingProblem problem = make_training_problem(net_cfg);
    TrainerConfig tc = make_trainer_config(net_cfg);
    tc.step_size = cfg.limit.h;
    tc.max_steps = std::max<std::size_t>(cfg.limit.steps, 1);
    tc.resample_each_step = false;
    tc.tolerance = 0.0;

    std::vector<ComparisonRow> rows;
    for (std::size_t width : cfg.limit.compare_widths) {
        for (std::uint64_t seed : cfg.limit.compare_seeds) {
            Trainer trainer(problem, tc, make_initial_params(cfg, width, seed));
            trainer.set_fixed_grid(quad);
            trainer.set_record_wall_time(false);
            double worst = 0.0;
            std::size_t k = 0;
            for (std::size_t step = 0; step <= cfg.limit.steps; ++step) {
                if (step % every == 0 || step == cfg.limit.steps) {
                    const Vector q = network_values(trainer.params(), problem, test);
                    worst = std::max(worst, (q - limit_values.at(k++)).cwiseAbs().maxCoeff());
                }
                if (step < cfg.limit.steps) trainer.step(true);
            }
            rows.push_back({width, seed, worst});
        }
    }
    return rows;
}

int cmd_limit(const ExperimentConfig& cfg, std::ostream& log) {
    return guarded(cfg, "limit", log, [&](const fs::path& dir) {
        const LimitProblem lp = make_limit_problem(cfg);
        LimitState state = fresh_limit_state(cfg, lp.domain);
        LimitOptions opts;
        opts.alpha = cfg.trainer.alpha;
        opts.h = cfg.limit.h;
        opts.steps = cfg.limit.steps;
        opts.diagnostics_every = cfg.limit.diagnostics_every;
        if (const auto exact = reference_solution(cfg)) {
            Stream vs(derived_seed(cfg.run.seed, SeedSlot::validation));
            const PointSet vpts = lp.domain.sample(kValidationPoints, vs);
            const Vector u = exact_values(*exact, vpts);
            opts.validator = [&lp, vpts, u](const LimitState& st) { return rms_error(limit_q_values(st, lp, vpts), u); };
        }
        auto s = status_header(cfg, "limit");
        std::vector<LimitRow> rows;
        int code = kExitOk;
        try {
            rows = limit_ode_integrate(state, lp, opts);
            s["status"] = "completed";
        } catch (const LimitBlowUp& e) {
            s["status"] = "blow_up";
            s["message"] = e.what();
            log << "limit: " << e.what() << '\n';
            code = kExitError;
        }
        {
            auto os = open_out(dir / "trajectory.csv");
            write_limit_csv(os, rows);
        }
        if (!rows.empty()) {
            s["final_t"] = rows.back().t;
            s["final_residual"] = rows.back().residual;
            if (rows.back().l2_err) s["final_l2_err"] = *rows.back().l2_err;
        }
        if (code == kExitOk && cfg.limit.compare_with_solve) {
            const auto cmp = paired_comparison(cfg);
            auto os = open_out(dir / "comparison.csv");
            os << "width,seed,sup_diff\n";
            for (const auto& r : cmp) os << r.width << ',' << r.seed << ',' << fmt(r.sup_diff) << '\n';
            auto ms = open_out(dir / "comparison_medians.csv");
            ms << "width,median_sup_diff\n";
            for (const auto& [w, m] : medians_by_width(cmp, &ComparisonRow::sup_diff)) ms << w << ',' << fmt(m) << '\n';
        }
        write_status(dir, s);
        if (code == kExitOk) log << "limit: integrated " << cfg.limit.steps << " steps\n";
        return code;
    });
}

// -- kernel-diag -----------------------------------------------------------------

std::vector<DriftRow> drift_experiment(const ExperimentConfig& cfg) {
    const Domain domain = make_domain(cfg);
    Stream ks(derived_seed(cfg.run.seed, SeedSlot::kernel_points));
    const PointSet pts = domain.sample(cfg.diagnostics.kernel_points, ks);
    std::vector<DriftRow> rows;
    for (std::size_t width : cfg.diagnostics.drift_widths) {
        ExperimentConfig c = cfg;
        c.network.width = width;
        const TrainingProblem problem = make_training_problem(c);
        for (std::uint64_t seed : cfg.diagnostics.drift_seeds) {
            const NetworkParams init = make_initial_params(c, width, seed);
            TrainerConfig tc = make_trainer_config(c);
            tc.seed = derived_seed(seed, SeedSlot::trainer);
            tc.alpha = cfg.diagnostics.drift_alpha;
            tc.max_steps = std::max<std::size_t>(cfg.diagnostics.drift_steps, 1);
            tc.tolerance = 0.0;
            tc.divergence_factor = 1e300;
            Trainer trainer(problem, tc, init);
            trainer.set_record_wall_time(false);
            for (std::size_t s = 0; s < cfg.diagnostics.drift_steps; ++s) trainer.step(true);
            const KernelDrift d = kernel_drift(ntk_kernel(init, pts, pts, 2), ntk_kernel(trainer.params(), pts, pts, 2));
            rows.push_back({width, seed, d.sup, d.mean_square});
        }
    }
    return rows;
}

int cmd_kernel_diag(const ExperimentConfig& cfg, std::ostream& log) {
    return guarded(cfg, "kernel-diag", log, [&](const fs::path& dir) {
        const Domain domain = make_domain(cfg);
        std::vector<Checkpoint> ckpts;
        for (const std::string& path : cfg.diagnostics.checkpoints) {
            if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path);
            ckpts.push_back(load_checkpoint(path));
            require_dim("kernel-diag checkpoint", domain.dim(), ckpts.back().params.dim());
        }
        const NetworkParams params =
            ckpts.empty() ? make_initial_params(cfg, cfg.network.width, cfg.run.seed) : ckpts.front().params;

        Stream ks(derived_seed(cfg.run.seed, SeedSlot::kernel_points));
        const PointSet pts = domain.sample(cfg.diagnostics.kernel_points, ks);
        const KernelMatrix A = ntk_kernel(params, pts, pts, 2);
        const KernelMatrix B = windowed(A, domain);
        {
            auto os = open_out(dir / "kernel.csv");
            write_kernel_csv(os, A);
        }
        {
            auto os = open_out(dir / "kernel_B.csv");
            write_kernel_csv(os, B);
        }
        auto s = status_header(cfg, "kernel-diag");
        bool psd_ok = true;
        {
            auto os = open_out(dir / "psd_summary.csv");
            os << "kernel,min_eig,max_eig,trace,asymmetry,psd_ok\n";
            for (const auto& [name, K] : {std::pair<const char*, const KernelMatrix*>{"A", &A}, {"B", &B}}) {
                const SpectrumSummary sp = gram_spectrum(K->value);
                const bool ok = sp.min_eig >= -1e-10 * sp.trace;
                psd_ok = psd_ok && ok;
                os << name << ',' << fmt(sp.min_eig) << ',' << fmt(sp.max_eig) << ',' << fmt(sp.trace) << ','
                   << fmt(sp.asymmetry) << ',' << (ok ? 1 : 0) << '\n';
            }
        }
        if (ckpts.size() >= 1) {
            auto os = open_out(dir / "drift.csv");
            os << "from,to,sup,mean_square\n";
            for (std::size_t i = 0; i < ckpts.size(); ++i) {
                const KernelDrift d = kernel_drift(A, ntk_kernel(ckpts[i].params, pts, pts, 2));
                os << ckpts.front().step << ',' << ckpts[i].step << ',' << fmt(d.sup) << ',' << fmt(d.mean_square)
                   << '\n';
            }
        }
        if (cfg.diagnostics.drift_steps > 0 && !cfg.diagnostics.drift_widths.empty()) {
            const auto rows = drift_experiment(cfg);
            auto os = open_out(dir / "drift_table.csv");
            os << "width,seed,sup,mean_square\n";
            for (const auto& r : rows)
                os << r.width << ',' << r.seed << ',' << fmt(r.sup) << ',' << fmt(r.mean_square) << '\n';
            nlohmann::ordered_json med = nlohmann::ordered_json::array();
            for (const auto& [w, m] : medians_by_width(rows, &DriftRow::sup)) med.push_back({{"width", w}, {"median_sup", m}});
            s["drift_medians"] = med;
        }
        {
            auto os = open_out(dir / "limit_convergence.csv");
            os << "features,sup_diff_to_reference,max_std_error,mean_std_error\n";
            const auto& Ps = cfg.diagnostics.limit_kernel_features;
            if (!Ps.empty()) {
                // Reference: the largest feature count, drawn from its own seed.
                const std::size_t Pref = *std::max_element(Ps.begin(), Ps.end());
                const InitSpec ref_spec = make_init_spec(cfg, derived_seed(cfg.run.seed + 1, SeedSlot::features));
                const KernelMatrix ref = limit_kernel(ref_spec, static_cast<Eigen::Index>(Pref), pts, pts);
                const InitSpec spec = make_init_spec(cfg, derived_seed(cfg.run.seed, SeedSlot::features));
                for (std::size_t P : Ps) {
                    const KernelMatrix K = limit_kernel(spec, static_cast<Eigen::Index>(P), pts, pts);
                    os << P << ',' << fmt((K.value - ref.value).cwiseAbs().maxCoeff()) << ','
                       << fmt(K.std_error->maxCoeff()) << ',' << fmt(K.std_error->mean()) << '\n';
                }
            }
        }
        s["status"] = psd_ok ? "ok" : "psd_violation";
        write_status(dir, s);
        log << "kernel-diag: wrote kernel, PSD and drift summaries\n";
        return psd_ok ? kExitOk : kExitError;
    });
}

}  // namespace qpde
