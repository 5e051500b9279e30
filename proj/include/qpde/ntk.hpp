#pragma once

#include "qpde/domain.hpp"
#include "qpde/network.hpp"
#include "qpde/operator.hpp"
#include "qpde/random.hpp"
#include "qpde/types.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace qpde {

enum class KernelKind {
    network_A,  // A^N at given parameters
    network_B,  // eta(x) eta(y) A^N
    limit_A,    // Monte-Carlo estimate of the limit kernel A
    limit_B,
};

/// Kernel values K(x_i, y_j) with optional derivative blocks in y:
///   d1[k](i, j)     = d/dy_k K(x_i, y_j)
///   d2[k*n + l](i, j) = d^2/dy_k dy_l K(x_i, y_j)
struct KernelMatrix {
    KernelKind kind = KernelKind::network_A;
    PointSet X, Y;
    int derivatives = 0;
    Matrix value;
    std::vector<Matrix> d1;
    std::vector<Matrix> d2;
    std::optional<Matrix> std_error;  // per-entry Monte-Carlo standard error (limit kernels)

    [[nodiscard]] int dim() const { return X.empty() ? 0 : static_cast<int>(X.front().size()); }
};

/// A^N(x, y) = (1/N) sum_i [ sigma(z_i(x)) sigma(z_i(y)) + c_i^2 sigma'(z_i(x)) sigma'(z_i(y)) (x.y + 1) ]
/// with analytic y-derivatives up to `derivatives` (0, 1 or 2).
KernelMatrix ntk_kernel(const NetworkParams& params, const PointSet& X, const PointSet& Y, int derivatives = 0);

/// B = eta(x) eta(y) A, derivative blocks by the product rule in y.
KernelMatrix windowed(const KernelMatrix& A, const Domain& domain);

/// Monte-Carlo estimate of the limit kernel A from P fresh initialization
/// draws; identical to ntk_kernel() at init_params(spec, P, dim). Reports
/// per-entry standard errors of the value block.
KernelMatrix limit_kernel(const InitSpec& spec, Eigen::Index P, const PointSet& X, const PointSet& Y,
                          int derivatives = 0);

struct KernelDrift {
    double sup = 0.0;          // max over sampled pairs of H(K1, K2)(x, y)
    double mean_square = 0.0;  // mu x mu integral of H^2 over the sample
};

/// H(K1, K2)(x, y) = |dK| + sum_k |d_yk dK| + sum_kl |d_yk d_yl dK|.
/// Both kernels need second-derivative blocks on identical point sets.
KernelDrift kernel_drift(const KernelMatrix& K1, const KernelMatrix& K2);

struct SpectrumSummary {
    double min_eig = 0.0;
    double max_eig = 0.0;
    double trace = 0.0;
    double asymmetry = 0.0;  // max |K - K^T|
};

SpectrumSummary gram_spectrum(const Matrix& gram);

/// Limit kernel B(x, y) for single pairs, from a frozen feature sample.
double limit_b_entry(const NetworkParams& features, const Domain& domain, const Point& x, const Point& y);

struct BNormEstimate {
    double value = 0.0;      // estimate of <B v, v>, clamped at 0 when negative within noise
    double raw = 0.0;        // unclamped estimate
    double std_error = 0.0;
    std::size_t pairs = 0;
};

/// <B v, v> = E_{x,y ~ mu} [ B(x, y) v(x) v(y) ] from m independent pairs.
BNormEstimate b_norm_estimate(const std::function<double(const Point&)>& v, const Domain& domain,
                              const NetworkParams& features, std::size_t m, Stream& stream);

/// Sample-level operator bound: with K_ij = B(x_i, x_j)/m acting on L^2 of
/// the empirical measure, |B v|^2 <= lambda_top |v|_B^2 holds exactly.
struct SampleBNorms {
    double b_norm_sq = 0.0;     // <K v, v>
    double image_norm_sq = 0.0; // |K v|^2
    double lambda_top = 0.0;
};
SampleBNorms sample_b_norms(const Vector& v_values, const PointSet& X, const NetworkParams& features,
                            const Domain& domain);

/// CSV: row,col,value[,d_k...,d_kl...]
void write_kernel_csv(std::ostream& os, const KernelMatrix& K);

// -- wide-network limit ------------------------------------------------------

/// Collocation representation of the limit field
///   Q_t(y) = Q_0(y) + eta(y) (1/m) sum_j a_j(t) eta(x_j) A_P(x_j, y),
/// with Q_0 = (1 - eta) f and A_P the kernel of P frozen feature draws.
struct LimitState {
    PointSet quad;          // x_j, frozen
    Vector eta_quad;        // eta(x_j)
    NetworkParams features; // P frozen (c, w, b) draws
    Vector coeffs;          // a_j(t)
    double t = 0.0;
    // Activations of the features at the quadrature points, cached when
    // m * P is small enough; shared between copies of the state.
    std::shared_ptr<const std::vector<UnitActivations>> quad_units;
};

LimitState make_limit_state(const Domain& domain, PointSet quad, const InitSpec& spec, Eigen::Index P);

struct LimitProblem {
    Domain domain;
    BoundaryData boundary;
    Operator op;
};

/// Value, gradient and Hessian of Q_t at y.
EvalBundle limit_q_bundle(const LimitState& state, const LimitProblem& problem, const Point& y);
/// Values of Q_t at many points, sharing one feature expansion.
Vector limit_q_values(const LimitState& state, const LimitProblem& problem, const PointSet& ys);

struct LimitRow {
    std::size_t step = 0;
    double t = 0.0;
    double residual = 0.0;    // mean over quadrature points of (L Q_t)^2
    double b_residual = 0.0;  // |B_hat L Q_t|^2 on the quadrature measure
    std::optional<double> l2_err;
};

struct LimitOptions {
    double alpha = 1.0;
    double h = 1.0;
    std::size_t steps = 0;
    double blowup_factor = 1e6;
    std::size_t diagnostics_every = 1;
    std::function<double(const LimitState&)> validator;  // e.g. L2 error against an oracle
};

class LimitBlowUp : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Explicit Euler on the coefficients: a_j += h alpha L Q_t(x_j). Returns one
/// row per diagnostics step, including the initial state.
std::vector<LimitRow> limit_ode_integrate(LimitState& state, const LimitProblem& problem,
                                          const LimitOptions& opts);

/// CSV: t,residual,l2_err,b_residual
void write_limit_csv(std::ostream& os, const std::vector<LimitRow>& rows);

}  // namespace qpde
