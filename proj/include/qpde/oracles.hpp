#pragma once

#include "qpde/domain.hpp"
#include "qpde/random.hpp"
#include "qpde/types.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace qpde {

/// Modified Bessel function I_nu(z) by its power series
///   sum_k (z/2)^(2k+nu) / (k! (k+nu)!),
/// summed until the next term is below 1e-17 of the partial sum.
/// Defined for integer nu >= 0 and z in [0, 60].
double bessel_i(int nu, double z);

enum class Problem { bm1d, bm2d, bm6d };

Problem parse_problem(std::string_view tag);
std::string_view problem_name(Problem p);
int problem_dim(Problem p);

/// Closed-form solution of 1 - gamma u + (1/2) Laplacian(u) = 0 on the unit
/// ball with u = 0 on the sphere, for n = 1, 2, 6 (n = 6 only for gamma = 1).
class ExactSolution {
public:
    ExactSolution(Problem problem, double gamma);

    [[nodiscard]] Problem problem() const { return problem_; }
    [[nodiscard]] double gamma() const { return gamma_; }
    [[nodiscard]] int dim() const { return problem_dim(problem_); }

    [[nodiscard]] EvalBundle bundle(const Point& x) const;
    [[nodiscard]] double value(const Point& x) const { return bundle(x).value; }

private:
    Problem problem_;
    double gamma_;
    double k_;  // sqrt(2 gamma)
    // Radial problems are written as u = phi(s), s = |x|^2, with phi a power
    // series: phi(s) = 1/gamma - coef_0 - coef_1 s - coef_2 s^2 - ...
    std::vector<double> series_;
};

EvalBundle exact_bundle(const ExactSolution& sol, const Point& x);

using ScalarField = std::function<double(const Point&)>;

struct GridSpec {
    enum class Kind { uniform_1d, random, radial };
    Kind kind = Kind::random;
    // uniform_1d
    double lo = -0.95, hi = 0.95;
    std::size_t points = 201;
    // random: `points` i.i.d. uniform interior points
    // radial: `points_per_shell` sphere points at each radius
    std::vector<double> shells;
    std::size_t points_per_shell = 400;
    std::uint64_t seed = 0;
};

struct PointError {
    Point x;
    double q = 0.0, u = 0.0;
    double abs_err = 0.0, rel_err = 0.0;
};

struct ShellError {
    double r = 0.0;
    double mse = 0.0;
    double max_rel = 0.0;  // e_r; absolute error when absolute_fallback is set
    bool absolute_fallback = false;
};

struct ErrorReport {
    double l2 = 0.0;       // root-mean-square over the grid points
    double sup = 0.0;
    double max_rel = 0.0;  // over points with |u| >= rel_floor
    std::vector<PointError> profile;
    std::vector<ShellError> shells;
};

/// Shells (or points) where |u| falls below this use absolute error.
inline constexpr double kRelativeErrorFloor = 1e-6;

ErrorReport error_report(const ScalarField& q, const ExactSolution& sol, const BallDomain& domain,
                         const GridSpec& grid);

/// CSV: point rows "x0,..,q,u,abs_err,rel_err" or, in radial mode,
/// "r,mse,e_r,absolute_fallback".
void write_error_csv(std::ostream& os, const ErrorReport& report, const GridSpec& grid);

}  // namespace qpde
