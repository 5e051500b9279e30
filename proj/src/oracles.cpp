#include "qpde/oracles.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace qpde {

double bessel_i(int nu, double z) {
    if (nu < 0) throw InputDomainError("bessel_i: order must be a non-negative integer");
    if (!(z >= 0.0 && z <= 60.0)) throw InputDomainError("bessel_i: argument outside [0, 60]");
    if (z == 0.0) return nu == 0 ? 1.0 : 0.0;
    const double half = 0.5 * z;
    const double q = half * half;
    double term = 1.0;
    for (int j = 1; j <= nu; ++j) term *= half / j;
    double sum = term;
    for (int k = 0;; ++k) {
        term *= q / ((k + 1.0) * (k + 1.0 + nu));
        sum += term;
        // Terms increase until k ~ z/2, then decay geometrically.
        if (k + 1 > half && term < 1e-17 * sum) break;
    }
    return sum;
}

Problem parse_problem(std::string_view tag) {
    if (tag == "bm1d") return Problem::bm1d;
    if (tag == "bm2d") return Problem::bm2d;
    if (tag == "bm6d") return Problem::bm6d;
    throw std::invalid_argument("unknown problem '" + std::string(tag) + "' (bm1d | bm2d | bm6d)");
}

std::string_view problem_name(Problem p) {
    switch (p) {
    case Problem::bm1d: return "bm1d";
    case Problem::bm2d: return "bm2d";
    case Problem::bm6d: return "bm6d";
    }
    return "unknown";
}

int problem_dim(Problem p) {
    switch (p) {
    case Problem::bm1d: return 1;
    case Problem::bm2d: return 2;
    case Problem::bm6d: return 6;
    }
    return 0;
}

ExactSolution::ExactSolution(Problem problem, double gamma) : problem_(problem), gamma_(gamma) {
    if (!(gamma > 0.0)) throw InputDomainError("ExactSolution: gamma must be positive");
    if (problem == Problem::bm6d && gamma != 1.0)
        throw InputDomainError("ExactSolution: the 6D closed form is only available for gamma = 1");
    k_ = std::sqrt(2.0 * gamma);
    const double q = k_ * k_ / 4.0;

    // coefficient j of the subtracted series, in s = |x|^2
    //   1D: cosh(k x) / (gamma cosh k)          -> k^(2j) / ((2j)! gamma cosh k)
    //   2D: I0(k r) / (gamma I0(k))             -> q^j / ((j!)^2 gamma I0(k))
    //   6D: I2(k r) / (r^2 I2(k))               -> q^(j+1) / (j! (j+2)! I2(k))
    double term = 0.0, norm = 0.0;
    switch (problem) {
    case Problem::bm1d: norm = gamma * std::cosh(k_); term = 1.0; break;
    case Problem::bm2d: norm = gamma * bessel_i(0, k_); term = 1.0; break;
    case Problem::bm6d: norm = bessel_i(2, k_); term = q / 2.0; break;
    }
    double peak = 0.0;
    for (int j = 0; j < 400; ++j) {
        series_.push_back(term / norm);
        peak = std::max(peak, term);
        if (j > 2 && term < 1e-20 * peak) break;
        switch (problem) {
        case Problem::bm1d: term *= k_ * k_ / ((2.0 * j + 1.0) * (2.0 * j + 2.0)); break;
        case Problem::bm2d: term *= q / ((j + 1.0) * (j + 1.0)); break;
        case Problem::bm6d: term *= q / ((j + 1.0) * (j + 3.0)); break;
        }
    }
}

EvalBundle ExactSolution::bundle(const Point& x) const {
    require_dim("ExactSolution::bundle", dim(), x.size());
    const double s = x.squaredNorm();
    // phi(s) = 1/gamma - sum_j a_j s^j, evaluated by Horner with derivatives.
    double p = 0.0, dp = 0.0, ddp = 0.0;
    for (auto it = series_.rbegin(); it != series_.rend(); ++it) {
        ddp = ddp * s + 2.0 * dp;
        dp = dp * s + p;
        p = p * s + *it;
    }
    const double phi = 1.0 / gamma_ - p;
    const double dphi = -dp;
    const double ddphi = -ddp;
    EvalBundle out(x.size());
    out.value = phi;
    out.gradient = 2.0 * dphi * x;
    out.hessian = 4.0 * ddphi * x * x.transpose();
    out.hessian.diagonal().array() += 2.0 * dphi;
    return out;
}

EvalBundle exact_bundle(const ExactSolution& sol, const Point& x) { return sol.bundle(x); }

ErrorReport error_report(const ScalarField& q, const ExactSolution& sol, const BallDomain& domain,
                         const GridSpec& grid) {
    ErrorReport rep;
    auto record = [&](const Point& x) {
        PointError pe;
        pe.x = x;
        pe.q = q(x);
        pe.u = sol.value(x);
        pe.abs_err = std::abs(pe.q - pe.u);
        pe.rel_err = std::abs(pe.u) >= kRelativeErrorFloor ? pe.abs_err / std::abs(pe.u) : pe.abs_err;
        return pe;
    };
    auto summarize = [&] {
        double sq = 0.0;
        for (const PointError& pe : rep.profile) {
            sq += pe.abs_err * pe.abs_err;
            rep.sup = std::max(rep.sup, pe.abs_err);
            if (std::abs(pe.u) >= kRelativeErrorFloor) rep.max_rel = std::max(rep.max_rel, pe.rel_err);
        }
        if (!rep.profile.empty()) rep.l2 = std::sqrt(sq / static_cast<double>(rep.profile.size()));
    };

    switch (grid.kind) {
    case GridSpec::Kind::uniform_1d: {
        if (domain.dim != 1) throw std::invalid_argument("error_report: uniform_1d grid needs a 1D domain");
        if (grid.points < 2 || !(grid.lo < grid.hi)) throw std::invalid_argument("error_report: bad 1D grid");
        for (std::size_t i = 0; i < grid.points; ++i) {
            Point x(1);
            x[0] = grid.lo + (grid.hi - grid.lo) * static_cast<double>(i) / static_cast<double>(grid.points - 1);
            rep.profile.push_back(record(x));
        }
        summarize();
        break;
    }
    case GridSpec::Kind::random: {
        if (grid.points < 1) throw std::invalid_argument("error_report: empty random grid");
        Stream stream(grid.seed);
        for (const Point& x : sample_interior(domain, grid.points, stream)) rep.profile.push_back(record(x));
        summarize();
        break;
    }
    case GridSpec::Kind::radial: {
        if (grid.shells.empty() || grid.points_per_shell < 1)
            throw std::invalid_argument("error_report: radial grid needs shells");
        Stream root(grid.seed);
        std::uint64_t idx = 0;
        for (double r : grid.shells) {
            Stream stream = root.split(idx++);
            ShellError sh;
            sh.r = r;
            double sq = 0.0, rel = 0.0, abs_max = 0.0;
            bool fallback = false;
            for (const Point& x : sample_sphere(domain, r, grid.points_per_shell, stream)) {
                PointError pe = record(x);
                sq += pe.abs_err * pe.abs_err;
                abs_max = std::max(abs_max, pe.abs_err);
                if (std::abs(pe.u) < kRelativeErrorFloor) fallback = true;
                rel = std::max(rel, pe.rel_err);
                rep.profile.push_back(std::move(pe));
            }
            sh.mse = sq / static_cast<double>(grid.points_per_shell);
            sh.absolute_fallback = fallback;
            sh.max_rel = fallback ? abs_max : rel;
            rep.shells.push_back(sh);
        }
        summarize();
        break;
    }
    }
    return rep;
}

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

void write_error_csv(std::ostream& os, const ErrorReport& report, const GridSpec& grid) {
    if (grid.kind == GridSpec::Kind::radial) {
        os << "r,mse,e_r,absolute_fallback\n";
        for (const ShellError& sh : report.shells)
            os << fmt(sh.r) << ',' << fmt(sh.mse) << ',' << fmt(sh.max_rel) << ',' << (sh.absolute_fallback ? 1 : 0)
               << '\n';
        return;
    }
    const Eigen::Index dim = report.profile.empty() ? 0 : report.profile.front().x.size();
    for (Eigen::Index k = 0; k < dim; ++k) os << 'x' << k << ',';
    os << "q,u,abs_err,rel_err\n";
    for (const PointError& pe : report.profile) {
        for (Eigen::Index k = 0; k < dim; ++k) os << fmt(pe.x[k]) << ',';
        os << fmt(pe.q) << ',' << fmt(pe.u) << ',' << fmt(pe.abs_err) << ',' << fmt(pe.rel_err) << '\n';
    }
}

}  // namespace qpde
