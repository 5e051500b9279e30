#include "doctest.h"

#include "qpde/domain.hpp"
#include "qpde/random.hpp"

#include <cmath>

using namespace qpde;

TEST_CASE("split streams depend only on parent seed and index") {
    const Stream parent(42);
    Stream a = parent.split(3);
    Stream used(42);
    for (int i = 0; i < 100; ++i) (void)used.normal();
    Stream b = used.split(3);
    for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
    CHECK(parent.split(3).seed() != parent.split(4).seed());
}

TEST_CASE("uniform_open never returns the endpoints") {
    Stream s(7);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform_open();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("eta of the unit ball") {
    const BallDomain ball(3);
    Point x(3);
    x << 0.1, -0.2, 0.3;
    const EvalBundle e = eta_bundle(ball, x);
    CHECK(e.value == doctest::Approx(1.0 - 0.14));
    CHECK((e.gradient + 2.0 * x).norm() == doctest::Approx(0.0));
    CHECK((e.hessian + 2.0 * Matrix::Identity(3, 3)).norm() == doctest::Approx(0.0));

    Point on(3);
    on << 0.0, 1.0, 0.0;
    CHECK(eta_bundle(ball, on).value == 0.0);
    CHECK(ball.on_boundary(on));
    CHECK_FALSE(ball.contains(on));
}

TEST_CASE("eta of a ball of radius 2") {
    const BallDomain ball(2, 2.0);
    Point x(2);
    x << 1.0, 1.0;
    CHECK(eta_bundle(ball, x).value == doctest::Approx(2.0));
}

TEST_CASE("interior samples are inside and radially uniform") {
    for (int n : {1, 2, 6}) {
        Stream s(11);
        const BallDomain ball(n);
        const PointSet pts = sample_interior(ball, 20000, s);
        double mean_rn = 0.0;
        for (const Point& x : pts) {
            REQUIRE(x.size() == n);
            REQUIRE(ball.contains(x));
            mean_rn += std::pow(x.norm(), n);
        }
        // |x|^n is uniform on (0, 1) for the uniform law on the ball.
        mean_rn /= static_cast<double>(pts.size());
        CHECK(mean_rn == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("sphere samples have the requested radius") {
    Stream s(5);
    const BallDomain ball(6);
    for (double r : {0.0, 0.25, 1.0}) {
        for (const Point& x : sample_sphere(ball, r, 100, s)) CHECK(x.norm() == doctest::Approx(r));
    }
    CHECK_THROWS_AS(sample_sphere(ball, 1.5, 3, s), InputDomainError);
    CHECK_THROWS_AS(sample_sphere(ball, -0.1, 3, s), InputDomainError);
}

TEST_CASE("zero boundary data by default") {
    const BoundaryData f;
    CHECK(f.is_zero());
    Point x = Point::Zero(2);
    const EvalBundle b = f(x);
    CHECK(b.value == 0.0);
    CHECK(b.gradient.size() == 2);
}

TEST_CASE("custom domain from a membership/eta/sampler triple") {
    // Interval (0, 2) with eta = x (2 - x).
    Domain d(
        1, [](const Point& x) { return x[0] > 0.0 && x[0] < 2.0; },
        [](const Point& x) {
            EvalBundle e(1);
            e.value = x[0] * (2.0 - x[0]);
            e.gradient[0] = 2.0 - 2.0 * x[0];
            e.hessian(0, 0) = -2.0;
            return e;
        },
        [](std::size_t m, Stream& s) {
            PointSet out;
            for (std::size_t i = 0; i < m; ++i) out.push_back(Point::Constant(1, s.uniform(0.0, 2.0)));
            return out;
        });
    Stream s(1);
    for (const Point& x : d.sample(50, s)) CHECK(d.contains(x));
    CHECK(d.ball() == nullptr);
    CHECK(Domain::unit_ball(2).ball() != nullptr);
}
