#include "doctest.h"

#include "qpde/operator.hpp"

#include <cmath>
#include <limits>

using namespace qpde;

namespace {

EvalBundle bundle2(double v, double gx, double gy, double hxx, double hxy, double hyy) {
    EvalBundle b(2);
    b.value = v;
    b.gradient << gx, gy;
    b.hessian << hxx, hxy, hxy, hyy;
    return b;
}

}  // namespace

TEST_CASE("model operator on a bundle") {
    const Operator op = model_bm(2.0);
    const Point x = Point::Zero(2);
    // 1 - 2 * 0.5 + 0.5 * (3 + 5)
    CHECK(apply(op, x, bundle2(0.5, 9, 9, 3, 7, 5)) == doctest::Approx(4.0));
    REQUIRE(op.gamma);
    CHECK(*op.gamma == 2.0);
}

TEST_CASE("zero operator") {
    CHECK(apply(zero_operator(), Point::Zero(2), bundle2(1, 2, 3, 4, 5, 6)) == 0.0);
}

TEST_CASE("linear generator reduces to the model operator") {
    LinearGenerator gen;
    gen.drift = [](const Point& x) -> Vector { return Vector::Zero(x.size()); };
    gen.diffusion = [](const Point& x) -> Matrix { return Matrix::Identity(x.size(), x.size()); };
    gen.source = [](const Point&) { return 1.0; };
    gen.gamma = 1.5;
    const Operator a = make_operator(gen), b = model_bm(1.5);
    Point x(2);
    x << 0.3, -0.2;
    const EvalBundle q = bundle2(0.7, 1, -2, 0.4, 0.1, -0.9);
    CHECK(apply(a, x, q) == doctest::Approx(apply(b, x, q)));
}

TEST_CASE("linear generator with drift and full diffusion") {
    LinearGenerator gen;
    gen.drift = [](const Point& x) -> Vector { return -x; };
    gen.diffusion = [](const Point&) -> Matrix {
        Matrix a(2, 2);
        a << 2, 1, 1, 3;
        return a;
    };
    gen.source = [](const Point& x) { return x[0]; };
    gen.gamma = 1.0;
    Point x(2);
    x << 0.5, 0.25;
    const EvalBundle q = bundle2(0.2, 1, 2, 1, 2, 3);
    // 0.5 - 0.2 + (-0.5 - 0.5) + 0.5 * (2 + 2 + 2 + 9)
    CHECK(apply(make_operator(gen), x, q) == doctest::Approx(6.8));
    CHECK(min_diffusion_eigenvalue(gen, PointSet{x}) == doctest::Approx((5 - std::sqrt(5.0)) / 2));
}

TEST_CASE("non-finite inputs produce a readable diagnostic") {
    const Operator op = model_bm(1.0);
    EvalBundle q = bundle2(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, 0, 0);
    const double r = apply(op, Point::Zero(2), q);
    CHECK_FALSE(std::isfinite(r));
    CHECK(nonfinite_diagnostic(op, Point::Zero(2), q, r).find("value") != std::string::npos);
}

TEST_CASE("monotonicity probe on the model operator") {
    // f1 = eta * x0, f2 = 0: margin = (1/2) E|grad f1|^2 > 0.
    const Domain d = Domain::unit_ball(2);
    const Field f1 = [](const Point& x) {
        const double eta = 1 - x.squaredNorm();
        EvalBundle b(2);
        b.value = eta * x[0];
        b.gradient << eta - 2 * x[0] * x[0], -2 * x[0] * x[1];
        b.hessian << -6 * x[0], -2 * x[1], -2 * x[1], -2 * x[0];
        return b;
    };
    const Field f2 = [](const Point&) { return EvalBundle(2); };
    Stream s(3);
    const MonotonicityEstimate e = monotonicity_probe(model_bm(1.0), d, s, f1, f2, 20000);
    CHECK(e.margin > 0.0);
    CHECK_FALSE(e.violated());
    CHECK(e.samples == 20000);
    // By parts the margin is (1/2) E|grad g|^2 = (1/2)(1 - 4 E r^2 + 5 E r^4) = 1/3.
    CHECK(e.margin == doctest::Approx(1.0 / 3.0).epsilon(0.05));

    // E g^2 = 1/24, so declaring gamma = 30 gives margin 1/3 - 29/24 < 0.
    Operator inflated = model_bm(1.0);
    inflated.gamma = 30.0;
    Stream s2(3);
    CHECK(monotonicity_probe(inflated, d, s2, f1, f2, 20000).violated());
    CHECK_THROWS(monotonicity_probe(zero_operator(), d, s2, f1, f2, 100));
}

TEST_CASE("gamma star rejects non-positive densities") {
    LinearGenerator gen;
    gen.drift = [](const Point& x) -> Vector { return Vector::Zero(x.size()); };
    gen.drift_jacobian = [](const Point& x) -> Matrix { return Matrix::Zero(x.size(), x.size()); };
    gen.diffusion = [](const Point& x) -> Matrix { return Matrix::Identity(x.size(), x.size()); };
    const Density zero = [](const Point& x) { return EvalBundle(x.size()); };
    CHECK_THROWS_AS(gamma_star_integrand(gen, zero, Point::Zero(1)), InputDomainError);
}

TEST_CASE("gamma star of a pure drift") {
    // nu = x, a = 0, f = 1: integrand = -div(nu) = -n.
    LinearGenerator gen;
    gen.drift = [](const Point& x) -> Vector { return x; };
    gen.drift_jacobian = [](const Point& x) -> Matrix { return Matrix::Identity(x.size(), x.size()); };
    gen.diffusion = [](const Point& x) -> Matrix { return Matrix::Zero(x.size(), x.size()); };
    const Density one = [](const Point& x) {
        EvalBundle b(x.size());
        b.value = 1.0;
        return b;
    };
    Stream s(1);
    const Domain d = Domain::unit_ball(3);
    CHECK(gamma_star(gen, one, d.sample(100, s), d, s).value == doctest::Approx(-3.0));
}

TEST_CASE("gamma star with position-dependent diffusion uses its derivatives") {
    // 1-d: a(x) = 1 + x^2, nu = 0, f = 1: integrand = a'' = 2.
    LinearGenerator gen;
    gen.drift = [](const Point&) -> Vector { return Vector::Zero(1); };
    gen.drift_jacobian = [](const Point&) -> Matrix { return Matrix::Zero(1, 1); };
    gen.diffusion = [](const Point& x) -> Matrix { return Matrix::Constant(1, 1, 1 + x[0] * x[0]); };
    gen.diffusion_gradient = [](const Point& x) { return std::vector<Matrix>{Matrix::Constant(1, 1, 2 * x[0])}; };
    gen.diffusion_hessian = [](const Point&) { return std::vector<Matrix>{Matrix::Constant(1, 1, 2.0)}; };
    const Density one = [](const Point&) {
        EvalBundle b(1);
        b.value = 1.0;
        return b;
    };
    CHECK(gamma_star_integrand(gen, one, Point::Constant(1, 0.3)) == doctest::Approx(2.0));
}
