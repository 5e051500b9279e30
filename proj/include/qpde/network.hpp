#pragma once

#include "qpde/domain.hpp"
#include "qpde/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace qpde {

enum class ActivationKind {
    sigmoid,
    tanh,
    // Sigmoid with a deliberately wrong first derivative. Only reachable from
    // code, never from a config file; the verify suite uses it to prove that
    // the gradient checks can fail.
    corrupted_sigmoid,
};

/// sigma and its first three derivatives at one argument.
struct ActivationValues {
    double s = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

ActivationValues activation(ActivationKind kind, double z);

/// Parses "sigmoid" or "tanh". Anything else (relu included) is rejected since
/// the training theory needs four bounded derivatives.
ActivationKind parse_activation(std::string_view name);
std::string_view activation_name(ActivationKind kind);

/// Parameters of S(x) = N^-beta sum_i c_i sigma(w_i . x + b_i).
/// Row i of `w` holds the input weights of unit i.
struct NetworkParams {
    Vector c;
    Matrix w;
    Vector b;
    double beta = 0.75;
    ActivationKind act = ActivationKind::sigmoid;

    NetworkParams() = default;
    NetworkParams(Vector c_, Matrix w_, Vector b_, double beta_,
                  ActivationKind act_ = ActivationKind::sigmoid,
                  bool allow_nontheoretical_beta = false);

    [[nodiscard]] Eigen::Index width() const { return c.size(); }
    [[nodiscard]] Eigen::Index dim() const { return w.cols(); }
    [[nodiscard]] double scale() const;  // N^-beta

    /// Flat parameter vector laid out as [c, w (row-major), b].
    [[nodiscard]] Vector flat() const;
    void assign_flat(const Vector& theta);
    [[nodiscard]] Eigen::Index flat_size() const { return width() * (dim() + 2); }
};

/// Checks 0.5 < beta < 1 unless the permissive flag is set.
void validate_beta(double beta, bool allow_nontheoretical_beta);

struct InitSpec {
    double c_bound = 1.0;  // c ~ Uniform[-c_bound, c_bound]
    double w_std = 1.0;    // w ~ Normal(0, w_std^2)
    double b_std = 1.0;    // b ~ Normal(0, b_std^2)
    std::uint64_t seed = 0;
};

NetworkParams init_params(const InitSpec& spec, Eigen::Index width, int dim, double beta = 0.75,
                          ActivationKind act = ActivationKind::sigmoid,
                          bool allow_nontheoretical_beta = false);

/// Per-unit activations at one point, kept so value, derivatives and
/// parameter gradients can be assembled without re-evaluating sigma.
struct UnitActivations {
    Vector s, d1, d2, d3;
};

UnitActivations unit_activations(const NetworkParams& params, const Point& x);

EvalBundle s_bundle(const NetworkParams& params, const Point& x);
EvalBundle s_bundle(const NetworkParams& params, const Point& x, const UnitActivations& units);

/// Product-rule assembly of Q = S eta + (1 - eta) f.
EvalBundle compose_q(const EvalBundle& s, const EvalBundle& eta, const EvalBundle& f);

EvalBundle q_bundle(const NetworkParams& params, const Domain& domain, const BoundaryData& boundary,
                    const Point& x);

/// Components of grad_theta Q at one point. The (1 - eta) f term carries no
/// parameters, so only eta and S enter.
struct ParamGradient {
    Vector dc;
    Matrix dw;
    Vector db;

    ParamGradient() = default;
    ParamGradient(Eigen::Index width, Eigen::Index dim)
        : dc(Vector::Zero(width)), dw(Matrix::Zero(width, dim)), db(Vector::Zero(width)) {}

    [[nodiscard]] Vector flat() const;
    [[nodiscard]] double norm() const;
};

ParamGradient param_grad_q(const NetworkParams& params, const Domain& domain, const Point& x);

// -- checkpoints ------------------------------------------------------------

struct Checkpoint {
    NetworkParams params;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

/// Text checkpoint. Schema, one record per line:
///   qpde-checkpoint 1
///   n <dim>
///   N <width>
///   beta <hexfloat>
///   activation <name>
///   seed <u64>
///   step <u64>
///   c <N hexfloats>
///   w <N*n hexfloats, row-major>
///   b <N hexfloats>
/// Reals are written as C99 hexfloats so a load reproduces every bit.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qpde
