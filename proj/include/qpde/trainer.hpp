#pragma once

#include "qpde/domain.hpp"
#include "qpde/network.hpp"
#include "qpde/operator.hpp"
#include "qpde/truncation.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qpde {

struct TrainerConfig {
    double alpha = 10.0;      // base rate; the step multiplier is alpha N^(2 beta - 1) step_size
    double step_size = 1.0;   // explicit Euler time step; training time t = step * step_size
    std::size_t batch = 1000;             // M
    std::size_t max_steps = 100000;       // T, number of parameter updates
    double tolerance = 1e-4;              // stop once err < tolerance
    std::uint64_t seed = 0;
    bool resample_each_step = true;       // false: reuse one fixed grid
    std::size_t telemetry_every = 1;      // validation cadence (rows are written every step)
    std::size_t checkpoint_every = 0;     // 0 = no intermediate checkpoints
    // Scales the estimator by 2 gamma, the constant that appears in the
    // discretized form of the flow. Constants only rescale time.
    bool discretized_form_factor = false;
    double divergence_factor = 1e6;
    int threads = 1;

    void validate() const;
    [[nodiscard]] double multiplier(Eigen::Index width, double beta) const;
};

/// Everything a training step needs besides the parameters.
struct TrainingProblem {
    Domain domain;
    BoundaryData boundary;
    Operator op;
    Truncation truncation;
};

/// Per-point quantities of one batch evaluation.
struct BatchEval {
    Vector residual;  // L Q(x_p)
    Vector psi;       // psi(L Q(x_p))
    Vector F;         // psi * psi'
    Vector eta;
    Matrix sigma;     // (p, i) = sigma(z_i(x_p))
    Matrix sigma_d1;  // (p, i) = sigma'(z_i(x_p))
    [[nodiscard]] double loss() const;  // mean psi^2
};

class NonFiniteResidual : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluates residuals and unit activations at every point. Throws
/// NonFiniteResidual naming the point (and `step`, if given).
BatchEval evaluate_batch(const NetworkParams& params, const TrainingProblem& problem, const PointSet& points,
                         int threads = 1, std::optional<std::size_t> step = std::nullopt);

/// (1/M) sum_p F(L Q(x_p)) grad_theta(-Q(x_p)). The derivative of L Q with
/// respect to theta is deliberately left out.
ParamGradient biased_gradient(const NetworkParams& params, const TrainingProblem& problem, const PointSet& points,
                              int threads = 1);
ParamGradient biased_gradient(const NetworkParams& params, const BatchEval& batch, const PointSet& points);

/// (1/M) sum_p psi(L Q(x_p))^2.
double batch_loss(const NetworkParams& params, const TrainingProblem& problem, const PointSet& points,
                  int threads = 1);

struct TelemetryRow {
    std::size_t step = 0;
    double err = 0.0;
    double update_norm = 0.0;
    double wall_ms = 0.0;
    std::optional<double> l2_err;
};

enum class TrainStatus { converged, step_budget };

struct TrainResult {
    NetworkParams params;
    std::vector<TelemetryRow> telemetry;
    TrainStatus status = TrainStatus::step_budget;
    std::size_t steps = 0;  // parameter updates applied
};

/// Mutable training state: current parameters, the sampling stream and the
/// reference loss for the divergence guard.
class Trainer {
public:
    using Validator = std::function<double(const NetworkParams&)>;
    using CheckpointSink = std::function<void(const NetworkParams&, std::size_t step)>;

    Trainer(TrainingProblem problem, TrainerConfig cfg, NetworkParams params);

    /// Replaces the batch with a fixed grid (implies no resampling).
    void set_fixed_grid(PointSet grid);
    void set_validator(Validator v) { validator_ = std::move(v); }
    void set_checkpoint_sink(CheckpointSink s) { checkpoint_sink_ = std::move(s); }
    /// Wall-clock timing in telemetry; off makes every artifact reproducible.
    void set_record_wall_time(bool on) { record_wall_time_ = on; }

    /// Samples (or reuses) a batch, records err for the current parameters
    /// and, if `apply_update`, moves theta by -multiplier * G_hat.
    TelemetryRow step(bool apply_update = true);

    /// Loops step() until err < tolerance or max_steps updates were made.
    TrainResult train();

    [[nodiscard]] const NetworkParams& params() const { return params_; }
    [[nodiscard]] const TrainerConfig& config() const { return cfg_; }
    [[nodiscard]] const PointSet& last_batch() const { return batch_; }
    [[nodiscard]] std::size_t step_index() const { return step_; }
    [[nodiscard]] double multiplier() const { return cfg_.multiplier(params_.width(), params_.beta); }

private:
    void prepare_batch();
    TelemetryRow record(const BatchEval& eval);
    void update(const BatchEval& eval, TelemetryRow& row);

    TrainingProblem problem_;
    TrainerConfig cfg_;
    NetworkParams params_;
    Stream stream_;
    PointSet batch_;
    bool fixed_grid_ = false;
    std::size_t step_ = 0;
    std::optional<double> initial_err_;
    double elapsed_ms_ = 0.0;
    bool record_wall_time_ = true;
    Validator validator_;
    CheckpointSink checkpoint_sink_;
};

/// CSV columns: step,err,update_norm,wall_ms[,l2_err]
void write_telemetry_csv(std::ostream& os, const std::vector<TelemetryRow>& rows);

}  // namespace qpde
