#include "qpde/operator.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace qpde {

Operator model_bm(double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("model_bm: gamma must be non-negative");
    Operator op;
    op.name = "model_bm";
    op.residual = [gamma](const Point&, const EvalBundle& q) {
        return 1.0 - gamma * q.value + 0.5 * q.hessian.trace();
    };
    op.gamma = gamma;
    return op;
}

Operator zero_operator() {
    Operator op;
    op.name = "zero";
    op.residual = [](const Point&, const EvalBundle&) { return 0.0; };
    op.lipschitz = 0.0;
    return op;
}

double apply(const Operator& op, const Point& x, const EvalBundle& q) {
    if (!op.residual) throw std::logic_error("operator '" + op.name + "' has no residual map");
    return op.residual(x, q);
}

std::string nonfinite_diagnostic(const Operator& op, const Point& x, const EvalBundle& q, double residual) {
    std::ostringstream os;
    os << "operator '" << op.name << "' produced residual " << residual << " at x = ["
       << x.transpose() << "]";
    if (!std::isfinite(q.value)) os << "; bundle value is " << q.value;
    if (!q.gradient.allFinite()) os << "; bundle gradient is non-finite";
    if (!q.hessian.allFinite()) os << "; bundle Hessian is non-finite";
    return os.str();
}

Operator make_operator(const LinearGenerator& gen) {
    if (!gen.drift || !gen.diffusion) throw std::invalid_argument("linear generator needs drift and diffusion");
    Operator op;
    op.name = "linear_generator";
    op.residual = [gen](const Point& x, const EvalBundle& q) {
        const double r = gen.source ? gen.source(x) : 0.0;
        return r - gen.gamma * q.value + gen.drift(x).dot(q.gradient) +
               0.5 * (gen.diffusion(x).cwiseProduct(q.hessian)).sum();
    };
    op.gamma = gen.gamma;
    return op;
}

double min_diffusion_eigenvalue(const LinearGenerator& gen, const PointSet& points) {
    double lo = std::numeric_limits<double>::infinity();
    for (const Point& x : points) {
        const Matrix a = gen.diffusion(x);
        const Matrix sym = 0.5 * (a + a.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
}

MonotonicityEstimate monotonicity_probe(const Operator& op, const Domain& domain, Stream& stream,
                                        const Field& f1, const Field& f2, std::size_t m,
                                        double target_std_error) {
    if (!op.gamma) throw std::invalid_argument("monotonicity_probe: operator declares no gamma");
    if (m < 2) throw std::invalid_argument("monotonicity_probe: need at least two samples");
    const double gamma = *op.gamma;
    const PointSet pts = domain.sample(m, stream);
    double sum_lhs = 0.0, sum_rhs = 0.0, sum_margin = 0.0, sum_margin2 = 0.0;
    for (const Point& x : pts) {
        const EvalBundle b1 = f1(x), b2 = f2(x);
        const double g = b1.value - b2.value;
        const double lhs = g * (apply(op, x, b1) - apply(op, x, b2));
        const double rhs = -gamma * g * g;
        sum_lhs += lhs;
        sum_rhs += rhs;
        sum_margin += rhs - lhs;
        sum_margin2 += (rhs - lhs) * (rhs - lhs);
    }
    const double md = static_cast<double>(m);
    MonotonicityEstimate est;
    est.samples = m;
    est.lhs = sum_lhs / md;
    est.rhs = sum_rhs / md;
    est.margin = sum_margin / md;
    const double var = std::max(0.0, (sum_margin2 - md * est.margin * est.margin) / (md - 1.0));
    est.std_error = std::sqrt(var / md);
    est.low_precision = target_std_error > 0.0 && est.std_error > target_std_error;
    return est;
}

double gamma_star_integrand(const LinearGenerator& gen, const Density& density, const Point& x) {
    const Eigen::Index n = x.size();
    const EvalBundle f = density(x);
    if (!(f.value > 0.0)) {
        std::ostringstream os;
        os << "gamma_star: density is not positive at x = [" << x.transpose() << "]";
        throw InputDomainError(os.str());
    }
    if (!gen.drift_jacobian) throw std::invalid_argument("gamma_star: drift_jacobian is required");
    const Vector nu = gen.drift(x);
    const Matrix jac = gen.drift_jacobian(x);
    const Matrix a = gen.diffusion(x);

    // sum_i d_i(nu_i f) = div(nu) f + nu . grad f
    const double drift_term = jac.trace() * f.value + nu.dot(f.gradient);

    // sum_ij d_ij(a_ij f) = sum_ij [ (d_ij a_ij) f + (d_i a_ij) d_j f + (d_j a_ij) d_i f + a_ij d_ij f ]
    double diff_term = (a.cwiseProduct(f.hessian)).sum();
    if (gen.diffusion_gradient) {
        const std::vector<Matrix> da = gen.diffusion_gradient(x);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                diff_term += da[i](i, j) * f.gradient[j] + da[j](i, j) * f.gradient[i];
    }
    if (gen.diffusion_hessian) {
        const std::vector<Matrix> dda = gen.diffusion_hessian(x);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) diff_term += dda[i * n + j](i, j) * f.value;
    }
    return (-drift_term + diff_term) / f.value;
}

GammaStar gamma_star(const LinearGenerator& gen, const Density& density, const PointSet& probe_points,
                     const Domain& domain, Stream& stream, int refine_rounds) {
    if (probe_points.empty()) throw std::invalid_argument("gamma_star: no probe points");
    GammaStar best{-std::numeric_limits<double>::infinity(), probe_points.front()};
    for (const Point& x : probe_points) {
        const double v = gamma_star_integrand(gen, density, x);
        if (v > best.value) best = {v, x};
    }
    // Local random search around the current best, shrinking the radius.
    double radius = 0.05;
    for (int round = 0; round < refine_rounds; ++round, radius *= 0.5) {
        for (int trial = 0; trial < 32; ++trial) {
            Point y = best.argmax;
            for (Eigen::Index k = 0; k < y.size(); ++k) y[k] += radius * stream.normal();
            if (!domain.contains(y)) continue;
            const double v = gamma_star_integrand(gen, density, y);
            if (v > best.value) best = {v, y};
        }
    }
    return best;
}

}  // namespace qpde
