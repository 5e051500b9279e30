#include "doctest.h"

#include "qpde/network.hpp"

#include <cmath>
#include <filesystem>

using namespace qpde;

TEST_CASE("sigmoid and its derivatives") {
    const ActivationValues a = activation(ActivationKind::sigmoid, 0.0);
    CHECK(a.s == doctest::Approx(0.5));
    CHECK(a.d1 == doctest::Approx(0.25));
    CHECK(a.d2 == doctest::Approx(0.0));
    CHECK(a.d3 == doctest::Approx(-0.125));
    // Stable far in the tails.
    const ActivationValues lo = activation(ActivationKind::sigmoid, -800.0);
    const ActivationValues hi = activation(ActivationKind::sigmoid, 800.0);
    CHECK(std::isfinite(lo.s));
    CHECK(std::isfinite(hi.s));
    CHECK(hi.s == doctest::Approx(1.0));
    CHECK(lo.d1 == 0.0);
}

TEST_CASE("activation derivatives match finite differences") {
    const double h = 1e-5;
    for (ActivationKind k : {ActivationKind::sigmoid, ActivationKind::tanh}) {
        for (double z : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
            const ActivationValues p = activation(k, z + h), m = activation(k, z - h), c = activation(k, z);
            CHECK(c.d1 == doctest::Approx((p.s - m.s) / (2 * h)).epsilon(1e-8));
            CHECK(c.d2 == doctest::Approx((p.d1 - m.d1) / (2 * h)).epsilon(1e-7));
            CHECK(c.d3 == doctest::Approx((p.d2 - m.d2) / (2 * h)).epsilon(1e-6));
        }
    }
}

TEST_CASE("activation catalogue") {
    CHECK(parse_activation("sigmoid") == ActivationKind::sigmoid);
    CHECK(parse_activation("tanh") == ActivationKind::tanh);
    CHECK_THROWS_AS(parse_activation("relu"), std::invalid_argument);
    CHECK(activation_name(ActivationKind::tanh) == "tanh");
}

TEST_CASE("beta outside (1/2, 1) is rejected unless allowed") {
    CHECK_THROWS_AS(validate_beta(0.3, false), std::invalid_argument);
    CHECK_THROWS_AS(validate_beta(0.5, false), std::invalid_argument);
    CHECK_THROWS_AS(validate_beta(1.0, false), std::invalid_argument);
    CHECK_NOTHROW(validate_beta(0.3, true));
    CHECK_NOTHROW(validate_beta(0.75, false));
    CHECK_THROWS(init_params(InitSpec{}, 8, 1, 0.3));
    CHECK_NOTHROW(init_params(InitSpec{}, 8, 1, 0.3, ActivationKind::sigmoid, true));
}

TEST_CASE("initialization draws follow the spec") {
    InitSpec spec;
    spec.c_bound = 0.5;
    spec.w_std = 2.0;
    spec.seed = 9;
    const NetworkParams p = init_params(spec, 20000, 2, 0.75);
    CHECK(p.c.cwiseAbs().maxCoeff() <= 0.5);
    const double w_var = p.w.squaredNorm() / static_cast<double>(p.w.size());
    CHECK(w_var == doctest::Approx(4.0).epsilon(0.03));
    CHECK(p.scale() == doctest::Approx(std::pow(20000.0, -0.75)));
    // Same seed, same draws.
    CHECK(init_params(spec, 50, 2).flat() == init_params(spec, 50, 2).flat());
}

TEST_CASE("S at a hand-computed point") {
    Vector c(2), b(2);
    Matrix w(2, 1);
    c << 1.0, -2.0;
    w << 1.0, 0.5;
    b << 0.0, 1.0;
    const NetworkParams p(c, w, b, 0.75);
    Point x = Point::Constant(1, 0.4);
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double expect = std::pow(2.0, -0.75) * (sig(0.4) - 2.0 * sig(1.2));
    CHECK(s_bundle(p, x).value == doctest::Approx(expect));
}

TEST_CASE("Q equals f on the boundary and S eta + (1 - eta) f inside") {
    const NetworkParams p = init_params(InitSpec{1, 1, 1, 3}, 16, 2);
    const Domain d = Domain::unit_ball(2);
    const BoundaryData f([](const Point& x) {
        EvalBundle b(2);
        b.value = 2.0 + x[0];
        b.gradient[0] = 1.0;
        return b;
    });
    Point on(2);
    on << std::cos(0.3), std::sin(0.3);
    CHECK(std::abs(q_bundle(p, d, f, on).value - f(on).value) <= 1e-12);
    Point in(2);
    in << 0.2, -0.1;
    const double eta = 1.0 - in.squaredNorm();
    CHECK(q_bundle(p, d, f, in).value == doctest::Approx(s_bundle(p, in).value * eta + (1 - eta) * f(in).value));
}

TEST_CASE("parameter gradient layout matches flat()") {
    const NetworkParams p = init_params(InitSpec{1, 1, 1, 4}, 5, 3);
    const Domain d = Domain::unit_ball(3);
    Point x(3);
    x << 0.1, 0.2, -0.3;
    const ParamGradient g = param_grad_q(p, d, x);
    const Vector flat = g.flat();
    REQUIRE(flat.size() == p.flat_size());
    CHECK(flat.head(5) == g.dc);
    CHECK(flat[5] == g.dw(0, 0));
    CHECK(flat[6] == g.dw(0, 1));
    CHECK(flat.tail(5) == g.db);
    CHECK(g.norm() == doctest::Approx(flat.norm()));
}

TEST_CASE("dimension mismatch is reported") {
    const NetworkParams p = init_params(InitSpec{}, 4, 2);
    CHECK_THROWS_AS(s_bundle(p, Point::Zero(3)), DimensionMismatch);
}

TEST_CASE("checkpoint round trip is bit exact") {
    NetworkParams p = init_params(InitSpec{1, 1, 1, 12}, 7, 2, 0.6, ActivationKind::tanh);
    p.c[0] = 0.1;  // not exactly representable in binary
    const auto path = std::filesystem::temp_directory_path() / "qpde_test_roundtrip.ckpt";
    save_checkpoint(path, Checkpoint{p, 12, 345});
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.params.flat() == p.flat());
    CHECK(back.params.beta == p.beta);
    CHECK(back.params.act == ActivationKind::tanh);
    CHECK(back.seed == 12);
    CHECK(back.step == 345);
    std::filesystem::remove(path);
    CHECK_THROWS(load_checkpoint(path));
}
