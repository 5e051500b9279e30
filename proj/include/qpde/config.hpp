#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpde {

/// Experiment configuration. On disk it is a flat, typed key-value file with
/// one section per module:
///
///   [network]
///   width = 256
///   beta = 0.75
///
/// `#` and `;` start comments. Every key has a default; write_config() of a
/// default-constructed config is the documented schema.
struct ExperimentConfig {
    struct Problem {
        std::string tag = "bm1d";          // bm1d | bm2d | bm6d
        std::string op = "model_bm";       // model_bm | linear_generator
        double gamma = 1.0;
        // linear_generator only: nu(x) = drift_scale * x, a = diffusion * I, r = source
        double drift_scale = 0.0;
        double diffusion = 1.0;
        double source = 1.0;
        bool operator==(const Problem&) const = default;
    } problem;

    struct Network {
        std::size_t width = 256;
        double beta = 0.75;
        std::string activation = "sigmoid";
        double c_bound = 1.0;
        double w_std = 1.0;
        double b_std = 1.0;
        bool allow_nontheoretical_beta = false;
        bool operator==(const Network&) const = default;
    } network;

    struct Trainer {
        double alpha = 10.0;
        double step_size = 1.0;
        std::size_t batch = 1000;
        std::size_t max_steps = 100000;
        double tolerance = 1e-4;
        bool resample_each_step = true;
        std::size_t telemetry_every = 100;
        std::size_t checkpoint_every = 1000;
        bool discretized_form_factor = false;
        bool operator==(const Trainer&) const = default;
    } trainer;

    struct Truncation {
        std::string mode = "identity";  // identity | smooth
        double delta = 0.0;             // <= 0 selects (1 - beta) / 4
        bool operator==(const Truncation&) const = default;
    } truncation;

    struct Limit {
        std::size_t features = 10000;   // P
        std::size_t quad_points = 400;  // m
        double h = 0.25;  // explicit Euler needs alpha * h below the kernel's stability limit
        std::size_t steps = 1000;
        std::size_t diagnostics_every = 10;
        bool compare_with_solve = false;
        std::vector<std::size_t> compare_widths{512, 1024, 2048, 4096};
        // The width trend is a few tens of percent per doubling while seed-to-seed
        // spread is larger, so medians need many seeds.
        std::vector<std::uint64_t> compare_seeds{1,  2,  3,  4,  5,  6,  7,  8,  9,  10, 11, 12, 13,
                                                 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25};
        std::size_t compare_test_points = 100;
        bool operator==(const Limit&) const = default;
    } limit;

    struct Diagnostics {
        std::string grid = "auto";  // auto | uniform_1d | random | radial
        std::size_t grid_points = 201;
        double grid_lo = -0.95;
        double grid_hi = 0.95;
        std::vector<double> shells{0.0, 0.25, 0.5, 0.75, 0.95};
        std::size_t shell_points = 400;
        std::size_t kernel_points = 30;
        std::vector<std::size_t> drift_widths{64, 256, 1024};
        std::vector<std::uint64_t> drift_seeds{1, 2, 3, 4, 5};
        std::size_t drift_steps = 20;
        // Rate for the drift experiment. At the solve rate the first steps move
        // every parameter O(1) for these widths, which hides the width trend.
        double drift_alpha = 1.0;
        std::vector<std::size_t> limit_kernel_features{1000, 10000, 100000};
        std::vector<std::string> checkpoints;  // kernel-diag: compare these checkpoints
        bool operator==(const Diagnostics&) const = default;
    } diagnostics;

    struct Run {
        std::uint64_t seed = 1;
        std::string out = "run";
        int threads = 1;
        std::string timing = "off";  // off | measured (measured wall times break byte-identical reruns)
        bool operator==(const Run&) const = default;
    } run;

    bool operator==(const ExperimentConfig&) const = default;

    /// Defaults for one of the bundled problems (bm1d, bm2d, bm6d).
    static ExperimentConfig defaults_for(const std::string& tag);
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const ExperimentConfig& cfg);
std::string config_to_string(const ExperimentConfig& cfg);

/// Cross-module validation; throws ConfigError listing every offending field.
void validate_config(const ExperimentConfig& cfg);

/// Resolved truncation delta (applies the (1 - beta)/4 default).
double resolved_delta(const ExperimentConfig& cfg);

}  // namespace qpde
