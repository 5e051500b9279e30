#include "qpde/verify.hpp"

#include "qpde/domain.hpp"
#include "qpde/ntk.hpp"
#include "qpde/operator.hpp"
#include "qpde/oracles.hpp"
#include "qpde/truncation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace qpde {

namespace {

constexpr double kDerivativeTol = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr std::array<int, 3> kDims{1, 2, 6};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

double rel_err(const Vector& analytic, const Vector& fd) {
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

/// Random network of small width in one of the test dimensions.
NetworkParams random_network(Stream& s, int dim, ActivationKind act) {
    const auto width = static_cast<Eigen::Index>(2 + s.engine()() % 14);
    const double beta = s.uniform(0.55, 0.95);
    InitSpec spec;
    spec.seed = s.engine()();
    spec.w_std = s.uniform(0.5, 2.0);
    return init_params(spec, width, dim, beta, act);
}

Point random_interior(Stream& s, int dim) { return sample_interior(BallDomain(dim), 1, s).front(); }

/// f(x) = sin(v . x) + |x|^2 / 3 with exact derivatives.
BoundaryData test_boundary(const Vector& v) {
    return BoundaryData([v](const Point& x) {
        EvalBundle b(static_cast<int>(x.size()));
        const double z = v.dot(x);
        b.value = std::sin(z) + x.squaredNorm() / 3.0;
        b.gradient = std::cos(z) * v + (2.0 / 3.0) * x;
        b.hessian = -std::sin(z) * v * v.transpose() +
                    (2.0 / 3.0) * Matrix::Identity(x.size(), x.size());
        return b;
    });
}

Vector random_direction(Stream& s, int dim) {
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = s.normal();
    return v;
}

CheckResult derivative_result(std::string name, double worst, std::size_t count, const std::string& what) {
    CheckResult r;
    r.name = std::move(name);
    r.measured = worst;
    r.threshold = kDerivativeTol;
    r.passed = worst < kDerivativeTol;
    r.detail = std::to_string(count) + " " + what;
    return r;
}

/// eta-vanishing smooth field g(x) = eta(x) * sum_k a_k sin(w_k . x + b_k).
Field random_vanishing_field(Stream& s, int dim) {
    struct Term {
        double a, b;
        Vector w;
    };
    std::vector<Term> terms;
    for (int k = 0; k < 3; ++k) terms.push_back({s.normal(), s.uniform(-3.0, 3.0), random_direction(s, dim)});
    return [terms, dim](const Point& x) {
        EvalBundle h(dim);
        for (const Term& t : terms) {
            const double z = t.w.dot(x) + t.b;
            h.value += t.a * std::sin(z);
            h.gradient += t.a * std::cos(z) * t.w;
            h.hessian -= t.a * std::sin(z) * t.w * t.w.transpose();
        }
        const EvalBundle eta = eta_bundle(BallDomain(dim), x);
        return compose_q(h, eta, EvalBundle(dim));
    };
}

}  // namespace

CheckResult check_param_gradient(const VerifyOptions& opts) {
    Stream s = Stream(opts.seed).split(101);
    double worst = 0.0;
    for (std::size_t i = 0; i < opts.instances; ++i) {
        const int dim = kDims[i % kDims.size()];
        NetworkParams p = random_network(s, dim, opts.activation);
        const Domain domain = Domain::unit_ball(dim);
        const BoundaryData f = test_boundary(random_direction(s, dim));
        const Point x = random_interior(s, dim);
        const Vector analytic = param_grad_q(p, domain, x).flat();
        const Vector theta = p.flat();
        Vector fd(theta.size());
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            Vector tp = theta, tm = theta;
            tp[k] += kFdStep;
            tm[k] -= kFdStep;
            p.assign_flat(tp);
            const double qp = q_bundle(p, domain, f, x).value;
            p.assign_flat(tm);
            const double qm = q_bundle(p, domain, f, x).value;
            fd[k] = (qp - qm) / (2.0 * kFdStep);
        }
        p.assign_flat(theta);
        worst = std::max(worst, rel_err(analytic, fd));
    }
    return derivative_result("gradient.parameters", worst, opts.instances, "random (params, x) in dims 1, 2, 6");
}

CheckResult check_spatial_gradient(const VerifyOptions& opts) {
    Stream s = Stream(opts.seed).split(102);
    double worst = 0.0;
    for (std::size_t i = 0; i < opts.instances; ++i) {
        const int dim = kDims[i % kDims.size()];
        const NetworkParams p = random_network(s, dim, opts.activation);
        const Domain domain = Domain::unit_ball(dim);
        const BoundaryData f = test_boundary(random_direction(s, dim));
        const Point x = random_interior(s, dim) * 0.95;
        const Vector analytic = q_bundle(p, domain, f, x).gradient;
        Vector fd(dim);
        for (int k = 0; k < dim; ++k) {
            Point xp = x, xm = x;
            xp[k] += kFdStep;
            xm[k] -= kFdStep;
            fd[k] = (q_bundle(p, domain, f, xp).value - q_bundle(p, domain, f, xm).value) / (2.0 * kFdStep);
        }
        worst = std::max(worst, rel_err(analytic, fd));
    }
    return derivative_result("gradient.spatial", worst, opts.instances, "random (params, x), nonzero f");
}

CheckResult check_spatial_hessian(const VerifyOptions& opts) {
    Stream s = Stream(opts.seed).split(103);
    double worst = 0.0;
    for (std::size_t i = 0; i < opts.instances; ++i) {
        const int dim = kDims[i % kDims.size()];
        const NetworkParams p = random_network(s, dim, opts.activation);
        const Domain domain = Domain::unit_ball(dim);
        const BoundaryData f = test_boundary(random_direction(s, dim));
        const Point x = random_interior(s, dim) * 0.95;
        const Matrix H = q_bundle(p, domain, f, x).hessian;
        Matrix fd(dim, dim);
        for (int k = 0; k < dim; ++k) {
            Point xp = x, xm = x;
            xp[k] += kFdStep;
            xm[k] -= kFdStep;
            fd.col(k) = (q_bundle(p, domain, f, xp).gradient - q_bundle(p, domain, f, xm).gradient) / (2.0 * kFdStep);
        }
        worst = std::max(worst, rel_err(H.reshaped(), fd.reshaped()));
    }
    return derivative_result("gradient.hessian", worst, opts.instances, "random (params, x), nonzero f");
}

CheckResult check_kernel_derivatives(const VerifyOptions& opts) {
    Stream s = Stream(opts.seed).split(104);
    double worst = 0.0;
    for (std::size_t i = 0; i < opts.instances; ++i) {
        const int dim = kDims[i % kDims.size()];
        const NetworkParams p = random_network(s, dim, opts.activation);
        const Domain domain = Domain::unit_ball(dim);
        const PointSet X{random_interior(s, dim)};
        const Point y = random_interior(s, dim) * 0.95;
        // A^N on even instances, the windowed B^N on odd ones.
        const bool windowed_kernel = i % 2 == 1;
        auto kernel = [&](const Point& yy, int deriv) {
            const KernelMatrix A = ntk_kernel(p, X, PointSet{yy}, deriv);
            return windowed_kernel ? windowed(A, domain) : A;
        };
        const KernelMatrix K = kernel(y, 2);
        Vector a1(dim), f1(dim), a2(dim * dim), f2(dim * dim);
        for (int k = 0; k < dim; ++k) {
            Point yp = y, ym = y;
            yp[k] += kFdStep;
            ym[k] -= kFdStep;
            const KernelMatrix Kp = kernel(yp, 1), Km = kernel(ym, 1);
            a1[k] = K.d1[k](0, 0);
            f1[k] = (Kp.value(0, 0) - Km.value(0, 0)) / (2.0 * kFdStep);
            for (int l = 0; l < dim; ++l) {
                a2[k * dim + l] = K.d2[k * dim + l](0, 0);
                f2[k * dim + l] = (Kp.d1[l](0, 0) - Km.d1[l](0, 0)) / (2.0 * kFdStep);
            }
        }
        worst = std::max({worst, rel_err(a1, f1), rel_err(a2, f2)});
    }
    return derivative_result("gradient.kernel_blocks", worst, opts.instances, "random (params, x, y), A and B");
}

CheckResult check_boundary_pinning(const VerifyOptions& opts) {
    Stream s = Stream(opts.seed).split(105);
    double worst = 0.0;
    for (int dim : kDims) {
        for (int rep = 0; rep < 3; ++rep) {
            const NetworkParams p = random_network(s, dim, opts.activation);
            const Domain domain = Domain::unit_ball(dim);
            const BoundaryData f = test_boundary(random_direction(s, dim));
            for (const Point& x : sample_sphere(BallDomain(dim), 1.0, 500, s))
                worst = std::max(worst, std::abs(q_bundle(p, domain, f, x).value - f(x).value));
        }
    }
    CheckResult r{"boundary.pinning", worst <= 1e-12, worst, 1e-12, "500 sphere points x 3 networks x dims 1, 2, 6"};
    return r;
}

std::vector<CheckResult> check_truncation_laws(const VerifyOptions&) {
    std::vector<CheckResult> out;
    const double beta = 0.75;
    const double delta = Truncation::default_delta(beta);
    constexpr std::size_t kGrid = 10000;
    constexpr double kLipschitzBound = 2.5;
    double worst_identity = 0.0, worst_psi = 0.0, worst_dpsi = 0.0, worst_lip = 0.0;
    std::size_t bound_fail = 0, monotone_fail = 0;
    std::string lip_detail;
    for (double N : {16.0, 256.0, 4096.0}) {
        const Truncation t(TruncationMode::smooth, delta, N);
        const double a = t.threshold();
        double lip = 0.0;
        TruncationValues prev{};
        double prev_x = 0.0;
        for (std::size_t i = 0; i < kGrid; ++i) {
            const double x = -10.0 * a + 20.0 * a * static_cast<double>(i) / static_cast<double>(kGrid - 1);
            const TruncationValues v = t.eval(x);
            if (std::abs(x) <= a) worst_identity = std::max({worst_identity, std::abs(v.psi - x), std::abs(v.psi_prime - 1.0)});
            worst_psi = std::max(worst_psi, std::abs(v.psi) / (2.0 * a));
            worst_dpsi = std::max(worst_dpsi, v.psi_prime);
            if (!f_error_bound_check(t, x)) ++bound_fail;
            if (i > 0) {
                // Strictly increasing wherever psi' is resolvable in double precision.
                if (v.psi < prev.psi || (v.psi == prev.psi && std::max(v.psi_prime, prev.psi_prime) > 1e-8)) ++monotone_fail;
                lip = std::max(lip, std::abs(v.F - prev.F) / (x - prev_x));
            }
            prev = v;
            prev_x = x;
        }
        worst_lip = std::max(worst_lip, lip);
        lip_detail += (lip_detail.empty() ? "" : ", ") + ("N=" + std::to_string(static_cast<int>(N)) + ": " + fmt(lip));
    }
    out.push_back({"truncation.identity_region", worst_identity == 0.0, worst_identity, 0.0, "psi(x) = x, psi' = 1 on |x| <= N^delta"});
    out.push_back({"truncation.psi_bound", worst_psi <= 1.0, worst_psi, 1.0, "max |psi| / (2 N^delta)"});
    out.push_back({"truncation.psi_prime_bound", worst_dpsi <= 1.0, worst_dpsi, 1.0, "max psi'"});
    out.push_back({"truncation.increasing", monotone_fail == 0, static_cast<double>(monotone_fail), 0.0,
                   "non-increasing adjacent grid pairs"});
    out.push_back({"truncation.F_error_bound", bound_fail == 0, static_cast<double>(bound_fail), 0.0,
                   "grid points violating |F(x) - x| <= 2|x| 1{|x| >= N^delta}"});
    out.push_back({"truncation.F_lipschitz", worst_lip <= kLipschitzBound, worst_lip, kLipschitzBound, lip_detail});
    return out;
}

std::vector<CheckResult> check_oracle_residuals(const VerifyOptions& opts) {
    std::vector<CheckResult> out;
    Stream s = Stream(opts.seed).split(106);
    for (Problem prob : {Problem::bm1d, Problem::bm2d, Problem::bm6d}) {
        const ExactSolution sol(prob, 1.0);
        const Operator op = model_bm(1.0);
        const double tol = prob == Problem::bm6d ? 1e-6 : 1e-10;
        double worst = 0.0;
        for (const Point& x : sample_interior(BallDomain(sol.dim()), 500, s))
            worst = std::max(worst, std::abs(apply(op, x, sol.bundle(x))));
        out.push_back({"oracle.residual." + std::string(problem_name(prob)), worst < tol, worst, tol, "|L u*| at 500 interior points"});
    }
    return out;
}

namespace {

struct ProbeSummary {
    double worst_z = std::numeric_limits<double>::infinity();  // min margin / std_error
    std::size_t violations = 0;
};

ProbeSummary probe_pairs(const Operator& op, std::uint64_t seed) {
    Stream s = Stream(seed).split(107);
    ProbeSummary sum;
    constexpr int kPairs = 20;
    for (int i = 0; i < kPairs; ++i) {
        const int dim = kDims[static_cast<std::size_t>(i) % kDims.size()];
        const Domain domain = Domain::unit_ball(dim);
        const Field f1 = random_vanishing_field(s, dim), f2 = random_vanishing_field(s, dim);
        const MonotonicityEstimate e = monotonicity_probe(op, domain, s, f1, f2, 4000);
        if (e.violated(3.0)) ++sum.violations;
        sum.worst_z = std::min(sum.worst_z, e.std_error > 0.0 ? e.margin / e.std_error : e.margin);
    }
    return sum;
}

}  // namespace

CheckResult check_monotonicity_model(const VerifyOptions& opts) {
    const ProbeSummary p = probe_pairs(model_bm(1.0), opts.seed);
    return {"monotonicity.model_gamma1", p.violations == 0, p.worst_z, -3.0,
            "min margin / std error over 20 pairs; violations: " + std::to_string(p.violations)};
}

CheckResult check_monotonicity_falsification(const VerifyOptions& opts) {
    Operator op = model_bm(1.0);
    op.gamma = 10.0;  // declared constant larger than the true one
    const ProbeSummary p = probe_pairs(op, opts.seed);
    return {"monotonicity.falsification_gamma10", p.violations > 0, static_cast<double>(p.violations), 1.0,
            "pairs flagged as violations (expected >= 1)"};
}

std::vector<CheckResult> check_gamma_star(const VerifyOptions& opts) {
    std::vector<CheckResult> out;
    Stream s = Stream(opts.seed).split(108);
    for (int dim : kDims) {
        const Domain domain = Domain::unit_ball(dim);
        const PointSet probes = sample_interior(BallDomain(dim), 10000, s);

        LinearGenerator flat;
        flat.drift = [dim](const Point&) -> Vector { return Vector::Zero(dim); };
        flat.drift_jacobian = [dim](const Point&) -> Matrix { return Matrix::Zero(dim, dim); };
        flat.diffusion = [dim](const Point&) -> Matrix { return Matrix::Identity(dim, dim); };
        const Density uniform = [dim](const Point&) {
            EvalBundle b(dim);
            b.value = 1.0;
            return b;
        };
        const double g0 = gamma_star(flat, uniform, probes, domain, s).value;
        out.push_back({"gamma_star.uniform.dim" + std::to_string(dim), g0 == 0.0, std::abs(g0), 0.0,
                       "nu = 0, a = I, uniform density"});

        LinearGenerator ou = flat;
        ou.drift = [](const Point& x) -> Vector { return -x; };
        ou.drift_jacobian = [dim](const Point&) -> Matrix { return -Matrix::Identity(dim, dim); };
        const Density gauss = [dim](const Point& x) {
            EvalBundle b(dim);
            b.value = std::exp(-0.5 * x.squaredNorm());
            b.gradient = -b.value * x;
            b.hessian = b.value * (x * x.transpose() - Matrix::Identity(dim, dim));
            return b;
        };
        const double g1 = gamma_star(ou, gauss, probes, domain, s).value;
        // Exact zero up to the rounding of n f - |x|^2 f + (|x|^2 - n) f.
        out.push_back({"gamma_star.stationary.dim" + std::to_string(dim), std::abs(g1) <= 1e-12, std::abs(g1), 1e-12,
                       "nu = -x, a = I, f = exp(-|x|^2/2)"});
    }
    return out;
}

std::vector<CheckResult> run_property_suite(const VerifyOptions& opts) {
    std::vector<CheckResult> all{check_param_gradient(opts), check_spatial_gradient(opts), check_spatial_hessian(opts),
                                 check_kernel_derivatives(opts), check_boundary_pinning(opts)};
    auto append = [&all](std::vector<CheckResult> v) { all.insert(all.end(), v.begin(), v.end()); };
    append(check_truncation_laws(opts));
    append(check_oracle_residuals(opts));
    all.push_back(check_monotonicity_model(opts));
    all.push_back(check_monotonicity_falsification(opts));
    append(check_gamma_star(opts));
    return all;
}

void print_results(std::ostream& os, const std::vector<CheckResult>& results) {
    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    for (const auto& r : results) {
        os << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ')
           << "measured " << fmt(r.measured) << "  threshold " << fmt(r.threshold) << "  " << r.detail << '\n';
    }
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& out, ActivationKind activation) {
    VerifyOptions opts;
    opts.seed = cfg.run.seed;
    opts.activation = activation;
    const auto results = run_property_suite(opts);
    print_results(out, results);
    const auto failed = std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return !r.passed; });
    out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace qpde
