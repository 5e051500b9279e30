#include "qpde/trainer.hpp"

#include "qpde/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace qpde {

void TrainerConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("trainer: " + m); };
    if (!(alpha > 0.0)) fail("alpha must be positive");
    if (!(step_size > 0.0)) fail("step_size must be positive");
    if (batch < 1) fail("batch (M) must be >= 1");
    if (max_steps < 1) fail("max_steps must be >= 1");
    if (!(tolerance >= 0.0)) fail("tolerance must be >= 0");
    if (telemetry_every < 1) fail("telemetry_every must be >= 1");
    if (!(divergence_factor > 1.0)) fail("divergence_factor must exceed 1");
    if (threads < 1) fail("threads must be >= 1");
}

double TrainerConfig::multiplier(Eigen::Index width, double beta) const {
    return alpha * std::pow(static_cast<double>(width), 2.0 * beta - 1.0) * step_size;
}

double BatchEval::loss() const { return psi.size() == 0 ? 0.0 : psi.squaredNorm() / static_cast<double>(psi.size()); }

BatchEval evaluate_batch(const NetworkParams& params, const TrainingProblem& problem, const PointSet& points,
                         int threads, std::optional<std::size_t> step) {
    if (points.empty()) throw std::invalid_argument("evaluate_batch: empty point set");
    const auto m = static_cast<Eigen::Index>(points.size());
    const Eigen::Index width = params.width();
    BatchEval out;
    out.residual.resize(m);
    out.psi.resize(m);
    out.F.resize(m);
    out.eta.resize(m);
    out.sigma.resize(m, width);
    out.sigma_d1.resize(m, width);
    std::vector<std::string> failures(points.size());

    parallel_for(points.size(), threads, [&](std::size_t p) {
        const Point& x = points[p];
        require_dim("evaluate_batch", params.dim(), x.size());
        const UnitActivations units = unit_activations(params, x);
        const EvalBundle eta = problem.domain.eta(x);
        const EvalBundle q = compose_q(s_bundle(params, x, units), eta, problem.boundary(x));
        const double r = apply(problem.op, x, q);
        const auto row = static_cast<Eigen::Index>(p);
        if (!std::isfinite(r)) failures[p] = nonfinite_diagnostic(problem.op, x, q, r);
        const TruncationValues tv = problem.truncation.eval(r);
        out.residual[row] = r;
        out.psi[row] = tv.psi;
        out.F[row] = tv.F;
        out.eta[row] = eta.value;
        out.sigma.row(row) = units.s.transpose();
        out.sigma_d1.row(row) = units.d1.transpose();
    });

    for (std::size_t p = 0; p < failures.size(); ++p) {
        if (failures[p].empty()) continue;
        std::ostringstream os;
        os << "non-finite residual";
        if (step) os << " at step " << *step;
        os << ", point " << p << ": " << failures[p];
        throw NonFiniteResidual(os.str());
    }
    return out;
}

ParamGradient biased_gradient(const NetworkParams& params, const BatchEval& batch, const PointSet& points) {
    const auto m = static_cast<Eigen::Index>(points.size());
    if (m == 0 || batch.F.size() != m) throw std::invalid_argument("biased_gradient: batch/points mismatch");
    const Eigen::Index dim = params.dim();
    // grad_theta Q(x) = eta(x) N^-beta (sigma, c sigma' x, c sigma'); the
    // estimator weights each point by -F(LQ)/M.
    const Vector coef = -(params.scale() / static_cast<double>(m)) * batch.F.cwiseProduct(batch.eta);
    Matrix X(m, dim);
    for (Eigen::Index p = 0; p < m; ++p) X.row(p) = points[static_cast<std::size_t>(p)].transpose();

    ParamGradient g;
    g.dc = batch.sigma.transpose() * coef;
    const Matrix weighted_d1 = coef.asDiagonal() * batch.sigma_d1;  // M x N
    g.db = params.c.cwiseProduct(weighted_d1.colwise().sum().transpose());
    g.dw = params.c.asDiagonal() * (weighted_d1.transpose() * X);
    return g;
}

ParamGradient biased_gradient(const NetworkParams& params, const TrainingProblem& problem, const PointSet& points,
                              int threads) {
    return biased_gradient(params, evaluate_batch(params, problem, points, threads), points);
}

double batch_loss(const NetworkParams& params, const TrainingProblem& problem, const PointSet& points,
                  int threads) {
    return evaluate_batch(params, problem, points, threads).loss();
}

Trainer::Trainer(TrainingProblem problem, TrainerConfig cfg, NetworkParams params)
    : problem_(std::move(problem)), cfg_(cfg), params_(std::move(params)), stream_(Stream(cfg.seed).split(7)) {
    cfg_.validate();
    require_dim("Trainer", problem_.domain.dim(), params_.dim());
    if (cfg_.discretized_form_factor && !problem_.op.gamma)
        throw std::invalid_argument("trainer: discretized_form_factor needs an operator with a declared gamma");
}

void Trainer::set_fixed_grid(PointSet grid) {
    if (grid.empty()) throw std::invalid_argument("Trainer::set_fixed_grid: empty grid");
    batch_ = std::move(grid);
    fixed_grid_ = true;
}

void Trainer::prepare_batch() {
    if (fixed_grid_) return;
    if (cfg_.resample_each_step || batch_.empty()) batch_ = problem_.domain.sample(cfg_.batch, stream_);
}

TelemetryRow Trainer::record(const BatchEval& eval) {
    TelemetryRow row;
    row.step = step_;
    row.err = eval.loss();
    if (!initial_err_) initial_err_ = row.err;
    if (row.err > cfg_.divergence_factor * std::max(*initial_err_, 1e-300)) {
        std::ostringstream os;
        os << "training diverged at step " << step_ << ": err = " << row.err << " exceeds "
           << cfg_.divergence_factor << " x initial err " << *initial_err_;
        throw TrainingDiverged(os.str());
    }
    if (validator_ && step_ % cfg_.telemetry_every == 0) row.l2_err = validator_(params_);
    return row;
}

void Trainer::update(const BatchEval& eval, TelemetryRow& row) {
    const ParamGradient g = biased_gradient(params_, eval, batch_);
    double mult = multiplier();
    if (cfg_.discretized_form_factor) mult *= 2.0 * *problem_.op.gamma;
    params_.c -= mult * g.dc;
    params_.w -= mult * g.dw;
    params_.b -= mult * g.db;
    row.update_norm = mult * g.norm();
    ++step_;
    if (checkpoint_sink_ && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0)
        checkpoint_sink_(params_, step_);
}

TelemetryRow Trainer::step(bool apply_update) {
    const auto t0 = std::chrono::steady_clock::now();
    prepare_batch();
    const BatchEval eval = evaluate_batch(params_, problem_, batch_, cfg_.threads, step_);
    TelemetryRow row = record(eval);
    if (apply_update) update(eval, row);
    elapsed_ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    row.wall_ms = record_wall_time_ ? elapsed_ms_ : 0.0;
    return row;
}

TrainResult Trainer::train() {
    TrainResult res;
    for (;;) {
        const auto t0 = std::chrono::steady_clock::now();
        prepare_batch();
        const BatchEval eval = evaluate_batch(params_, problem_, batch_, cfg_.threads, step_);
        TelemetryRow row = record(eval);
        // Stop before moving theta, so the last row's err describes the
        // returned parameters.
        bool done = true;
        if (row.err < cfg_.tolerance) {
            res.status = TrainStatus::converged;
        } else if (step_ >= cfg_.max_steps) {
            res.status = TrainStatus::step_budget;
        } else {
            update(eval, row);
            done = false;
        }
        elapsed_ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.wall_ms = record_wall_time_ ? elapsed_ms_ : 0.0;
        res.telemetry.push_back(row);
        if (done) break;
    }
    res.params = params_;
    res.steps = step_;
    return res;
}

void write_telemetry_csv(std::ostream& os, const std::vector<TelemetryRow>& rows) {
    const bool with_l2 = std::any_of(rows.begin(), rows.end(), [](const TelemetryRow& r) { return r.l2_err; });
    os << "step,err,update_norm,wall_ms" << (with_l2 ? ",l2_err" : "") << '\n';
    char buf[256];
    for (const TelemetryRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.3f", r.step, r.err, r.update_norm, r.wall_ms);
        os << buf;
        if (with_l2) {
            if (r.l2_err) {
                std::snprintf(buf, sizeof buf, ",%.17g", *r.l2_err);
                os << buf;
            } else {
                os << ',';
            }
        }
        os << '\n';
    }
}

}  // namespace qpde
