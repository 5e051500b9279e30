#pragma once

#include "qpde/domain.hpp"
#include "qpde/random.hpp"
#include "qpde/types.hpp"

#include <functional>
#include <optional>
#include <string>

namespace qpde {

/// A (possibly nonlinear) second-order operator evaluated pointwise from the
/// bundle of the field it acts on.
struct Operator {
    using Residual = std::function<double(const Point&, const EvalBundle&)>;

    std::string name;
    Residual residual;
    std::optional<double> lipschitz;  // declared, metadata only
    std::optional<double> gamma;      // declared strong-monotonicity constant
};

/// L u = 1 - gamma u + (1/2) Laplacian(u): the expected discounted exit time
/// of Brownian motion.
Operator model_bm(double gamma);

/// L u = 0. Used to check that the limit dynamics stay put.
Operator zero_operator();

/// L(x, u) evaluated on a bundle. Non-finite inputs give a non-finite result;
/// callers that need a message use nonfinite_diagnostic().
double apply(const Operator& op, const Point& x, const EvalBundle& q);

std::string nonfinite_diagnostic(const Operator& op, const Point& x, const EvalBundle& q, double residual);

/// Diffusion generator with discount and source:
///   L u = r - gamma u + nu . grad u + (1/2) tr(a Hess u),   a = sigma sigma^T.
/// Derivative callbacks are only needed by gamma_star(); leaving the
/// diffusion derivatives empty declares a constant diffusion matrix.
struct LinearGenerator {
    std::function<Vector(const Point&)> drift;
    std::function<Matrix(const Point&)> drift_jacobian;  // (i, j) = d nu_i / d x_j
    std::function<Matrix(const Point&)> diffusion;
    std::function<std::vector<Matrix>(const Point&)> diffusion_gradient;  // [k] = d a / d x_k
    std::function<std::vector<Matrix>(const Point&)> diffusion_hessian;   // [k * n + l] = d^2 a / dx_k dx_l
    std::function<double(const Point&)> source;
    double gamma = 0.0;
};

Operator make_operator(const LinearGenerator& gen);

/// Smallest eigenvalue of a(x) over the points; negative means a is not PSD.
double min_diffusion_eigenvalue(const LinearGenerator& gen, const PointSet& points);

/// Monte-Carlo check of <f1 - f2, L f1 - L f2> <= -gamma |f1 - f2|^2 in L^2(mu).
struct MonotonicityEstimate {
    double lhs = 0.0;        // <g, L f1 - L f2>
    double rhs = 0.0;        // -gamma |g|^2
    double margin = 0.0;     // rhs - lhs, non-negative when the inequality holds
    double std_error = 0.0;  // of the margin
    std::size_t samples = 0;
    bool low_precision = false;  // requested standard error not reached
    [[nodiscard]] bool violated(double n_sigma = 3.0) const { return margin < -n_sigma * std_error; }
};

using Field = std::function<EvalBundle(const Point&)>;

/// Uses the operator's declared gamma. Both fields must vanish on the boundary.
/// `target_std_error` > 0 flags the result when the estimate is noisier.
MonotonicityEstimate monotonicity_probe(const Operator& op, const Domain& domain, Stream& stream,
                                        const Field& f1, const Field& f2, std::size_t m,
                                        double target_std_error = 0.0);

/// Sampling density with derivatives (value, gradient, Hessian).
using Density = std::function<EvalBundle(const Point&)>;

struct GammaStar {
    double value = 0.0;
    Point argmax;
};

/// sup over probe points of
///   [ -sum_i d_i(nu_i f) + sum_ij d_ij(a_ij f) ] / f,
/// followed by a short random local search around the best point
/// (`refine_rounds` = 0 disables it). Throws on non-positive density.
GammaStar gamma_star(const LinearGenerator& gen, const Density& density, const PointSet& probe_points,
                     const Domain& domain, Stream& stream, int refine_rounds = 4);

/// The bracket above at a single point.
double gamma_star_integrand(const LinearGenerator& gen, const Density& density, const Point& x);

}  // namespace qpde
