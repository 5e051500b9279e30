#include "doctest.h"

#include "qpde/truncation.hpp"

#include <cmath>
#include <numbers>

using namespace qpde;

TEST_CASE("identity mode returns (x, 1, x)") {
    const Truncation t = Truncation::identity();
    const TruncationValues v = t.eval(-3.7);
    CHECK(v.psi == -3.7);
    CHECK(v.psi_prime == 1.0);
    CHECK(v.F == -3.7);
}

TEST_CASE("smooth mode is exact inside the threshold") {
    const Truncation t(TruncationMode::smooth, 0.0625, 256.0);
    CHECK(t.threshold() == doctest::Approx(std::pow(256.0, 0.0625)));
    for (double x : {-1.4, -0.3, 0.0, 0.9, 1.41}) {
        const TruncationValues v = t.eval(x);
        CHECK(v.psi == x);
        CHECK(v.psi_prime == 1.0);
        CHECK(v.F == x);
    }
}

TEST_CASE("smooth mode saturates at N^delta + sqrt(pi)/2") {
    const Truncation t(TruncationMode::smooth, 0.0625, 4096.0);
    const double limit = t.threshold() + std::sqrt(std::numbers::pi) / 2.0;
    CHECK(t.eval(1e6).psi == doctest::Approx(limit));
    CHECK(t.eval(-1e6).psi == doctest::Approx(-limit));
    CHECK(t.eval(50.0).psi_prime == 0.0);
}

TEST_CASE("tail value matches direct quadrature of g") {
    const Truncation t(TruncationMode::smooth, 0.1, 100.0);
    const double a = t.threshold(), x = a + 1.3;
    // Simpson on [a, x] of exp(-(s - a)^2).
    const int n = 2000;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double s = a + (x - a) * i / n;
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        sum += w * std::exp(-(s - a) * (s - a));
    }
    const double expect = a + sum * (x - a) / (3.0 * n);
    CHECK(t.eval(x).psi == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("F stays within 2|x| of x outside the threshold") {
    const Truncation t(TruncationMode::smooth, 0.0625, 256.0);
    CHECK(f_error_bound_check(t, 2.0 * t.threshold()));
    CHECK(f_error_bound_check(t, -2.0 * t.threshold()));
    CHECK(f_error_bound_check(t, 0.5 * t.threshold()));
    CHECK_THROWS(f_error_bound_check(Truncation::identity(), 1.0));
}

TEST_CASE("delta validation") {
    CHECK(Truncation::default_delta(0.75) == doctest::Approx(0.0625));
    CHECK_NOTHROW(validate_delta(0.1, 0.75));
    CHECK_THROWS(validate_delta(0.125, 0.75));
    CHECK_THROWS(validate_delta(0.0, 0.75));
    CHECK_THROWS(Truncation(TruncationMode::smooth, -0.1, 16.0));
    for (double beta : {0.51, 0.6, 0.75, 0.9, 0.99}) CHECK_NOTHROW(validate_delta(Truncation::default_delta(beta), beta));
}

TEST_CASE("mode names") {
    CHECK(parse_truncation_mode("smooth") == TruncationMode::smooth);
    CHECK(truncation_mode_name(TruncationMode::identity) == "identity");
    CHECK_THROWS(parse_truncation_mode("hard"));
}
