#include "doctest.h"

#include "qpde/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace qpde;

namespace {

NetworkParams net(int dim, Eigen::Index width, std::uint64_t seed) {
    InitSpec spec;
    spec.seed = seed;
    return init_params(spec, width, dim);
}

PointSet pts(int dim, std::size_t m, std::uint64_t seed) {
    Stream s(seed);
    return sample_interior(BallDomain(dim), m, s);
}

}  // namespace

TEST_CASE("single-unit kernel by hand") {
    Vector c(1), b(1);
    Matrix w(1, 2);
    c << 0.7;
    w << 0.3, -0.4;
    b << 0.1;
    const NetworkParams p(c, w, b, 0.75);
    Point x(2), y(2);
    x << 0.2, 0.5;
    y << -0.6, 0.1;
    const auto sg = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double zx = w.row(0).dot(x) + 0.1, zy = w.row(0).dot(y) + 0.1;
    const double expect = sg(zx) * sg(zy) +
                          0.49 * sg(zx) * (1 - sg(zx)) * sg(zy) * (1 - sg(zy)) * (x.dot(y) + 1.0);
    const KernelMatrix K = ntk_kernel(p, {x}, {y});
    CHECK(K.value(0, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("Gram matrices are symmetric and PSD") {
    for (int dim : {1, 2, 6}) {
        for (Eigen::Index N : {8, 64, 512}) {
            const PointSet X = pts(dim, 25, 3);
            const NetworkParams p = net(dim, N, 2);
            const KernelMatrix A = ntk_kernel(p, X, X);
            const SpectrumSummary sa = gram_spectrum(A.value);
            CHECK(sa.asymmetry <= 1e-14);
            CHECK(sa.min_eig >= -1e-10 * sa.max_eig);
            const SpectrumSummary sb = gram_spectrum(windowed(A, Domain::unit_ball(dim)).value);
            CHECK(sb.min_eig >= -1e-10 * sb.max_eig);
            CHECK(sb.trace <= sa.trace);
        }
    }
}

TEST_CASE("windowed kernel vanishes on the boundary") {
    const int dim = 2;
    Stream s(4);
    PointSet X = pts(dim, 5, 1);
    const PointSet edge = sample_sphere(BallDomain(dim), 1.0, 5, s);
    X.insert(X.end(), edge.begin(), edge.end());
    const KernelMatrix B = windowed(ntk_kernel(net(dim, 32, 1), X, X, 2), Domain::unit_ball(dim));
    for (int i = 5; i < 10; ++i) {
        CHECK(B.value.row(i).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(B.value.col(i).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("windowed derivative blocks follow the product rule") {
    const PointSet X = pts(1, 3, 5), Y = pts(1, 4, 6);
    const KernelMatrix A = ntk_kernel(net(1, 16, 3), X, Y, 2);
    const KernelMatrix B = windowed(A, Domain::unit_ball(1));
    for (std::size_t i = 0; i < X.size(); ++i) {
        for (std::size_t j = 0; j < Y.size(); ++j) {
            const double ex = 1 - X[i].squaredNorm(), ey = 1 - Y[j].squaredNorm(), y = Y[j][0];
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            const double a = A.value(ii, jj), a1 = A.d1[0](ii, jj), a2 = A.d2[0](ii, jj);
            CHECK(B.d1[0](ii, jj) == doctest::Approx(ex * (ey * a1 - 2 * y * a)));
            CHECK(B.d2[0](ii, jj) == doctest::Approx(ex * (ey * a2 - 4 * y * a1 - 2 * a)));
        }
    }
}

TEST_CASE("drift of a kernel against itself is zero") {
    const PointSet X = pts(2, 6, 1);
    const KernelMatrix A = ntk_kernel(net(2, 20, 1), X, X, 2);
    const KernelDrift d = kernel_drift(A, A);
    CHECK(d.sup == 0.0);
    CHECK(d.mean_square == 0.0);
    CHECK_THROWS(kernel_drift(ntk_kernel(net(2, 20, 1), X, X, 1), A));
    CHECK_THROWS(kernel_drift(A, ntk_kernel(net(2, 20, 1), pts(2, 6, 2), X, 2)));
}

TEST_CASE("drift of a shifted kernel") {
    const PointSet X = pts(1, 4, 1);
    const KernelMatrix A = ntk_kernel(net(1, 20, 1), X, X, 2);
    KernelMatrix B = A;
    B.value.array() += 0.5;
    const KernelDrift d = kernel_drift(A, B);
    CHECK(d.sup == doctest::Approx(0.5));
    CHECK(d.mean_square == doctest::Approx(0.25));
}

TEST_CASE("limit kernel matches the network kernel of the same draws") {
    InitSpec spec;
    spec.seed = 9;
    const PointSet X = pts(2, 4, 2);
    const KernelMatrix L = limit_kernel(spec, 300, X, X);
    const KernelMatrix A = ntk_kernel(init_params(spec, 300, 2), X, X);
    CHECK((L.value - A.value).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(L.std_error);
    CHECK(L.std_error->minCoeff() > 0.0);
    // Standard errors scale like P^-1/2.
    const KernelMatrix L4 = limit_kernel(spec, 1200, X, X);
    CHECK(L4.std_error->mean() == doctest::Approx(0.5 * L.std_error->mean()).epsilon(0.2));
}

TEST_CASE("sample B-norm bound holds exactly") {
    const PointSet X = pts(2, 40, 3);
    Vector v(40);
    for (Eigen::Index i = 0; i < 40; ++i) v[i] = std::sin(3.0 * X[static_cast<std::size_t>(i)][0]);
    const SampleBNorms s = sample_b_norms(v, X, net(2, 200, 5), Domain::unit_ball(2));
    CHECK(s.b_norm_sq >= 0.0);
    CHECK(s.image_norm_sq <= s.lambda_top * s.b_norm_sq * (1 + 1e-12));
}

TEST_CASE("B-norm estimate is non-negative for a non-trivial function") {
    Stream s(2);
    const BNormEstimate e = b_norm_estimate([](const Point& x) { return 1.0 + x[0]; }, Domain::unit_ball(1),
                                            net(1, 500, 1), 4000, s);
    CHECK(e.value >= 0.0);
    CHECK(e.raw > -3.0 * e.std_error);
    CHECK(e.pairs == 4000);
}

TEST_CASE("kernel CSV columns") {
    const PointSet X = pts(2, 2, 1);
    std::ostringstream os;
    write_kernel_csv(os, ntk_kernel(net(2, 4, 1), X, X, 2));
    const std::string s = os.str();
    CHECK(s.rfind("row,col,value,d_y0,d_y1,d_y0y0,d_y0y1,d_y1y0,d_y1y1\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 5);
}

TEST_CASE("limit dynamics with L = 0 stay at the initial field") {
    InitSpec spec;
    spec.seed = 1;
    const Domain dom = Domain::unit_ball(2);
    LimitState st = make_limit_state(dom, pts(2, 30, 2), spec, 200);
    const LimitProblem prob{dom, BoundaryData{}, zero_operator()};
    const PointSet probe = pts(2, 10, 8);
    const Vector before = limit_q_values(st, prob, probe);
    LimitOptions opts;
    opts.h = 0.5;
    opts.steps = 50;
    opts.diagnostics_every = 10;
    const std::vector<LimitRow> rows = limit_ode_integrate(st, prob, opts);
    CHECK(rows.size() == 6);
    CHECK(rows.back().t == doctest::Approx(25.0));
    CHECK((limit_q_values(st, prob, probe) - before).cwiseAbs().maxCoeff() == 0.0);
    CHECK(st.coeffs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("1-d limit dynamics reduce the residual") {
    InitSpec spec;
    spec.seed = 3;
    const Domain dom = Domain::unit_ball(1);
    LimitState st = make_limit_state(dom, pts(1, 100, 4), spec, 2000);
    const LimitProblem prob{dom, BoundaryData{}, model_bm(1.0)};
    LimitOptions opts;
    opts.alpha = 10.0;
    opts.h = 0.25;
    opts.steps = 200;
    opts.diagnostics_every = 50;
    const std::vector<LimitRow> rows = limit_ode_integrate(st, prob, opts);
    CHECK(rows.back().residual < 0.05 * rows.front().residual);
    CHECK(rows.back().b_residual < rows.front().b_residual);
}

TEST_CASE("limit field bundle matches values and vanishing Q_0") {
    InitSpec spec;
    spec.seed = 5;
    const Domain dom = Domain::unit_ball(2);
    LimitState st = make_limit_state(dom, pts(2, 20, 1), spec, 100);
    st.coeffs.setConstant(0.3);
    const LimitProblem prob{dom, BoundaryData{}, model_bm(1.0)};
    const PointSet ys = pts(2, 5, 3);
    const Vector vals = limit_q_values(st, prob, ys);
    for (std::size_t i = 0; i < ys.size(); ++i)
        CHECK(limit_q_bundle(st, prob, ys[i]).value == doctest::Approx(vals[static_cast<Eigen::Index>(i)]));
    Stream s(1);
    for (const Point& y : sample_sphere(BallDomain(2), 1.0, 5, s))
        CHECK(std::abs(limit_q_bundle(st, prob, y).value) <= 1e-12);
}

TEST_CASE("zero-step limit run writes only the initial row") {
    InitSpec spec;
    spec.seed = 1;
    const Domain dom = Domain::unit_ball(1);
    LimitState st = make_limit_state(dom, pts(1, 10, 1), spec, 50);
    const LimitProblem prob{dom, BoundaryData{}, model_bm(1.0)};
    LimitOptions opts;
    opts.steps = 0;
    const std::vector<LimitRow> rows = limit_ode_integrate(st, prob, opts);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].t == 0.0);
    std::ostringstream os;
    write_limit_csv(os, rows);
    CHECK(os.str().rfind("t,residual,l2_err,b_residual\n", 0) == 0);
    opts.h = 0.0;
    CHECK_THROWS(limit_ode_integrate(st, prob, opts));
}
