#pragma once

#include "qpde/config.hpp"
#include "qpde/network.hpp"
#include "qpde/ntk.hpp"
#include "qpde/oracles.hpp"
#include "qpde/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace qpde {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBudget = 2;

/// Named sub-seeds of the run seed, so every random object has its own stream.
enum class SeedSlot : std::uint64_t {
    init = 1,
    trainer = 2,
    validation = 3,
    report = 4,
    quadrature = 5,
    features = 6,
    kernel_points = 7,
    boundary = 8,
};
std::uint64_t derived_seed(std::uint64_t seed, SeedSlot slot);

Domain make_domain(const ExperimentConfig& cfg);
Operator make_problem_operator(const ExperimentConfig& cfg);
TrainingProblem make_training_problem(const ExperimentConfig& cfg);
LimitProblem make_limit_problem(const ExperimentConfig& cfg);
TrainerConfig make_trainer_config(const ExperimentConfig& cfg);
InitSpec make_init_spec(const ExperimentConfig& cfg, std::uint64_t seed);
NetworkParams make_initial_params(const ExperimentConfig& cfg, std::size_t width, std::uint64_t seed);

/// Closed-form solution when the configured problem has one (model operator,
/// zero boundary data).
std::optional<ExactSolution> reference_solution(const ExperimentConfig& cfg);
GridSpec make_grid(const ExperimentConfig& cfg);

/// Sup of |Q - f| over `m` points on the unit sphere.
double boundary_deviation(const NetworkParams& params, const Domain& domain, const BoundaryData& boundary,
                          std::size_t m, std::uint64_t seed);

// -- subcommands --------------------------------------------------------------
// Each writes a self-describing run directory (config.ini, VERSION,
// status.json and CSV artifacts) under cfg.run.out and returns an exit code.

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log);
int cmd_limit(const ExperimentConfig& cfg, std::ostream& log);
int cmd_kernel_diag(const ExperimentConfig& cfg, std::ostream& log);

// -- experiments reused by the subcommands and the acceptance checks -----------

struct DriftRow {
    std::size_t width = 0;
    std::uint64_t seed = 0;
    double sup = 0.0;
    double mean_square = 0.0;
};

/// For every (width, seed): train drift_steps steps from a fresh init and
/// measure H(A_T, A_0) on diagnostics.kernel_points fixed points.
std::vector<DriftRow> drift_experiment(const ExperimentConfig& cfg);

struct ComparisonRow {
    std::size_t width = 0;
    std::uint64_t seed = 0;
    double sup_diff = 0.0;  // max over matched times of sup_y |Q^N_t(y) - Q_t(y)|
};

/// Trains networks on the limit quadrature grid (no resampling, identity
/// truncation, time step limit.h) next to one limit trajectory and records the
/// largest difference over matched times on compare_test_points points.
std::vector<ComparisonRow> paired_comparison(const ExperimentConfig& cfg);

/// Median of each group of rows sharing a width, in the order widths appear.
template <class Row>
std::vector<std::pair<std::size_t, double>> medians_by_width(const std::vector<Row>& rows, double Row::*value);

double median(std::vector<double> v);

}  // namespace qpde

#include <algorithm>

template <class Row>
std::vector<std::pair<std::size_t, double>> qpde::medians_by_width(const std::vector<Row>& rows, double Row::*value) {
    std::vector<std::pair<std::size_t, double>> out;
    std::vector<std::size_t> widths;
    for (const Row& r : rows)
        if (std::find(widths.begin(), widths.end(), r.width) == widths.end()) widths.push_back(r.width);
    for (std::size_t w : widths) {
        std::vector<double> vals;
        for (const Row& r : rows)
            if (r.width == w) vals.push_back(r.*value);
        out.emplace_back(w, median(std::move(vals)));
    }
    return out;
}
