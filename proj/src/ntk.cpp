#include "qpde/ntk.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace qpde {

namespace {

Matrix stack_points(const PointSet& pts, Eigen::Index dim) {
    Matrix m(static_cast<Eigen::Index>(pts.size()), dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        require_dim("kernel point", dim, pts[i].size());
        m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    }
    return m;
}

struct ActivationTable {
    Matrix s, d1, d2, d3;  // points x units
};

ActivationTable activation_table(const NetworkParams& params, const PointSet& pts, int order) {
    const auto rows = static_cast<Eigen::Index>(pts.size());
    const Eigen::Index width = params.width();
    ActivationTable t;
    t.s.resize(rows, width);
    t.d1.resize(rows, width);
    if (order >= 1) t.d2.resize(rows, width);
    if (order >= 2) t.d3.resize(rows, width);
    for (Eigen::Index p = 0; p < rows; ++p) {
        const Vector z = params.w * pts[static_cast<std::size_t>(p)] + params.b;
        for (Eigen::Index i = 0; i < width; ++i) {
            const ActivationValues a = activation(params.act, z[i]);
            t.s(p, i) = a.s;
            t.d1(p, i) = a.d1;
            if (order >= 1) t.d2(p, i) = a.d2;
            if (order >= 2) t.d3(p, i) = a.d3;
        }
    }
    return t;
}

}  // namespace

KernelMatrix ntk_kernel(const NetworkParams& params, const PointSet& X, const PointSet& Y, int derivatives) {
    if (derivatives < 0 || derivatives > 2) throw std::invalid_argument("ntk_kernel: derivatives must be 0, 1 or 2");
    if (X.empty() || Y.empty()) throw std::invalid_argument("ntk_kernel: empty point set");
    const Eigen::Index n = params.dim();
    const double inv_n = 1.0 / static_cast<double>(params.width());
    const Matrix xm = stack_points(X, n), ym = stack_points(Y, n);
    const ActivationTable tx = activation_table(params, X, 0);
    const ActivationTable ty = activation_table(params, Y, derivatives);
    const Vector c2 = params.c.cwiseAbs2();

    KernelMatrix K;
    K.kind = KernelKind::network_A;
    K.X = X;
    K.Y = Y;
    K.derivatives = derivatives;

    const Matrix cx = tx.d1 * c2.asDiagonal();                    // c^2 sigma'(z(x))
    const Matrix inner = (xm * ym.transpose()).array() + 1.0;      // x.y + 1
    K.value = inv_n * (tx.s * ty.s.transpose() + inner.cwiseProduct(cx * ty.d1.transpose()));

    if (derivatives >= 1) {
        const Matrix cx_d1y = cx * ty.d1.transpose();
        K.d1.resize(static_cast<std::size_t>(n));
        std::vector<Matrix> d2w(static_cast<std::size_t>(n));  // sigma''(z(y)) w_k, reused below
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto wk = params.w.col(k).asDiagonal();
            const Matrix d1w = ty.d1 * wk;
            d2w[static_cast<std::size_t>(k)] = ty.d2 * wk;
            Matrix blk = tx.s * d1w.transpose() + inner.cwiseProduct(cx * d2w[static_cast<std::size_t>(k)].transpose());
            blk += xm.col(k).asDiagonal() * cx_d1y;
            K.d1[static_cast<std::size_t>(k)] = inv_n * blk;
        }
        if (derivatives >= 2) {
            K.d2.resize(static_cast<std::size_t>(n * n));
            for (Eigen::Index k = 0; k < n; ++k) {
                for (Eigen::Index l = k; l < n; ++l) {
                    const Vector wkl = params.w.col(k).cwiseProduct(params.w.col(l));
                    const Matrix d2kl = ty.d2 * wkl.asDiagonal();
                    const Matrix d3kl = ty.d3 * wkl.asDiagonal();
                    Matrix blk = tx.s * d2kl.transpose() + inner.cwiseProduct(cx * d3kl.transpose());
                    blk += xm.col(l).asDiagonal() * (cx * d2w[static_cast<std::size_t>(k)].transpose());
                    blk += xm.col(k).asDiagonal() * (cx * d2w[static_cast<std::size_t>(l)].transpose());
                    blk *= inv_n;
                    K.d2[static_cast<std::size_t>(k * n + l)] = blk;
                    if (l != k) K.d2[static_cast<std::size_t>(l * n + k)] = blk;
                }
            }
        }
    }
    return K;
}

KernelMatrix windowed(const KernelMatrix& A, const Domain& domain) {
    if (A.kind != KernelKind::network_A && A.kind != KernelKind::limit_A)
        throw std::invalid_argument("windowed: input must be an A kernel");
    const auto rows = static_cast<Eigen::Index>(A.X.size()), cols = static_cast<Eigen::Index>(A.Y.size());
    const Eigen::Index n = A.dim();
    Vector ex(rows);
    for (Eigen::Index i = 0; i < rows; ++i) ex[i] = domain.eta(A.X[static_cast<std::size_t>(i)]).value;
    std::vector<EvalBundle> ey;
    ey.reserve(A.Y.size());
    for (const Point& y : A.Y) ey.push_back(domain.eta(y));
    Vector eyv(cols);
    for (Eigen::Index j = 0; j < cols; ++j) eyv[j] = ey[static_cast<std::size_t>(j)].value;

    KernelMatrix B = A;
    B.kind = A.kind == KernelKind::network_A ? KernelKind::network_B : KernelKind::limit_B;
    B.value = ex.asDiagonal() * A.value * eyv.asDiagonal();
    if (A.std_error) B.std_error = ex.cwiseAbs().asDiagonal() * (*A.std_error) * eyv.cwiseAbs().asDiagonal();

    auto col_scale = [&](const Matrix& m, auto&& coef) {
        Matrix out = m;
        for (Eigen::Index j = 0; j < cols; ++j) out.col(j) *= coef(ey[static_cast<std::size_t>(j)]);
        return out;
    };
    if (A.derivatives >= 1) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            Matrix blk = col_scale(A.value, [k](const EvalBundle& e) { return e.gradient[k]; }) +
                         col_scale(A.d1[ku], [](const EvalBundle& e) { return e.value; });
            B.d1[ku] = ex.asDiagonal() * blk;
        }
    }
    if (A.derivatives >= 2) {
        for (Eigen::Index k = 0; k < n; ++k) {
            for (Eigen::Index l = 0; l < n; ++l) {
                const auto kl = static_cast<std::size_t>(k * n + l);
                Matrix blk = col_scale(A.value, [k, l](const EvalBundle& e) { return e.hessian(k, l); });
                blk += col_scale(A.d1[static_cast<std::size_t>(l)], [k](const EvalBundle& e) { return e.gradient[k]; });
                blk += col_scale(A.d1[static_cast<std::size_t>(k)], [l](const EvalBundle& e) { return e.gradient[l]; });
                blk += col_scale(A.d2[kl], [](const EvalBundle& e) { return e.value; });
                B.d2[kl] = ex.asDiagonal() * blk;
            }
        }
    }
    return B;
}

KernelMatrix limit_kernel(const InitSpec& spec, Eigen::Index P, const PointSet& X, const PointSet& Y,
                          int derivatives) {
    if (P < 1) throw std::invalid_argument("limit_kernel: P must be >= 1");
    if (X.empty()) throw std::invalid_argument("limit_kernel: empty point set");
    const int dim = static_cast<int>(X.front().size());
    const NetworkParams features = init_params(spec, P, dim);
    KernelMatrix K = ntk_kernel(features, X, Y, derivatives);
    K.kind = KernelKind::limit_A;

    // Standard error of the mean of the per-feature terms:
    //   t_i(x, y) = s_i(x) s_i(y) + c_i^2 s'_i(x) s'_i(y) (x.y + 1)
    const ActivationTable tx = activation_table(features, X, 0);
    const ActivationTable ty = activation_table(features, Y, 0);
    const Vector c2 = features.c.cwiseAbs2();
    const Matrix xm = stack_points(X, dim), ym = stack_points(Y, dim);
    const Matrix inner = (xm * ym.transpose()).array() + 1.0;
    // E[t^2] = (1/P) sum_i t_i^2, expanded so no P-sized temporaries per entry.
    const Matrix ss = tx.s.cwiseAbs2() * ty.s.cwiseAbs2().transpose();
    const Matrix cross = (tx.s.cwiseProduct(tx.d1) * c2.asDiagonal()) * ty.s.cwiseProduct(ty.d1).transpose();
    const Matrix dd = (tx.d1.cwiseAbs2() * c2.cwiseAbs2().asDiagonal()) * ty.d1.cwiseAbs2().transpose();
    const double inv_p = 1.0 / static_cast<double>(P);
    const Matrix second = inv_p * (ss + 2.0 * inner.cwiseProduct(cross) + inner.cwiseAbs2().cwiseProduct(dd));
    Matrix var = second - K.value.cwiseAbs2();
    var = var.cwiseMax(0.0);
    const double denom = P > 1 ? static_cast<double>(P - 1) : 1.0;
    K.std_error = (var * (static_cast<double>(P) / denom) * inv_p).cwiseSqrt();
    return K;
}

KernelDrift kernel_drift(const KernelMatrix& K1, const KernelMatrix& K2) {
    if (K1.derivatives < 2 || K2.derivatives < 2)
        throw std::invalid_argument("kernel_drift: both kernels need second-derivative blocks");
    if (K1.X.size() != K2.X.size() || K1.Y.size() != K2.Y.size())
        throw std::invalid_argument("kernel_drift: mismatched point sets");
    for (std::size_t i = 0; i < K1.X.size(); ++i)
        if (K1.X[i] != K2.X[i]) throw std::invalid_argument("kernel_drift: mismatched point sets");
    for (std::size_t j = 0; j < K1.Y.size(); ++j)
        if (K1.Y[j] != K2.Y[j]) throw std::invalid_argument("kernel_drift: mismatched point sets");
    Matrix H = (K1.value - K2.value).cwiseAbs();
    for (std::size_t k = 0; k < K1.d1.size(); ++k) H += (K1.d1[k] - K2.d1[k]).cwiseAbs();
    for (std::size_t k = 0; k < K1.d2.size(); ++k) H += (K1.d2[k] - K2.d2[k]).cwiseAbs();
    return {H.maxCoeff(), H.cwiseAbs2().mean()};
}

SpectrumSummary gram_spectrum(const Matrix& gram) {
    if (gram.rows() != gram.cols()) throw std::invalid_argument("gram_spectrum: matrix is not square");
    SpectrumSummary s;
    s.asymmetry = (gram - gram.transpose()).cwiseAbs().maxCoeff();
    const Matrix sym = 0.5 * (gram + gram.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    s.min_eig = es.eigenvalues().minCoeff();
    s.max_eig = es.eigenvalues().maxCoeff();
    s.trace = gram.trace();
    return s;
}

double limit_b_entry(const NetworkParams& features, const Domain& domain, const Point& x, const Point& y) {
    const UnitActivations ux = unit_activations(features, x), uy = unit_activations(features, y);
    const double a = (ux.s.dot(uy.s) + (x.dot(y) + 1.0) * (features.c.cwiseAbs2().cwiseProduct(ux.d1)).dot(uy.d1)) /
                     static_cast<double>(features.width());
    return domain.eta(x).value * domain.eta(y).value * a;
}

BNormEstimate b_norm_estimate(const std::function<double(const Point&)>& v, const Domain& domain,
                              const NetworkParams& features, std::size_t m, Stream& stream) {
    if (m < 2) throw std::invalid_argument("b_norm_estimate: need at least two pairs");
    const PointSet xs = domain.sample(m, stream);
    const PointSet ys = domain.sample(m, stream);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double t = limit_b_entry(features, domain, xs[i], ys[i]) * v(xs[i]) * v(ys[i]);
        sum += t;
        sum2 += t * t;
    }
    const double md = static_cast<double>(m);
    BNormEstimate est;
    est.pairs = m;
    est.raw = sum / md;
    const double var = std::max(0.0, (sum2 - md * est.raw * est.raw) / (md - 1.0));
    est.std_error = std::sqrt(var / md);
    est.value = std::max(est.raw, 0.0);
    return est;
}

SampleBNorms sample_b_norms(const Vector& v_values, const PointSet& X, const NetworkParams& features,
                            const Domain& domain) {
    const auto m = static_cast<Eigen::Index>(X.size());
    require_dim("sample_b_norms", m, v_values.size());
    KernelMatrix B = windowed(ntk_kernel(features, X, X, 0), domain);
    B.kind = KernelKind::limit_B;
    const Matrix K = B.value / static_cast<double>(m);
    const Vector Kv = K * v_values;
    SampleBNorms out;
    out.b_norm_sq = v_values.dot(Kv) / static_cast<double>(m);
    out.image_norm_sq = Kv.squaredNorm() / static_cast<double>(m);
    out.lambda_top = gram_spectrum(K).max_eig;
    return out;
}

void write_kernel_csv(std::ostream& os, const KernelMatrix& K) {
    const int n = K.dim();
    os << "row,col,value";
    if (K.derivatives >= 1)
        for (int k = 0; k < n; ++k) os << ",d_y" << k;
    if (K.derivatives >= 2)
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) os << ",d_y" << k << "y" << l;
    if (K.std_error) os << ",std_error";
    os << '\n';
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
    };
    for (Eigen::Index i = 0; i < K.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < K.value.cols(); ++j) {
            os << i << ',' << j;
            put(K.value(i, j));
            for (const Matrix& d : K.d1) put(d(i, j));
            for (const Matrix& d : K.d2) put(d(i, j));
            if (K.std_error) put((*K.std_error)(i, j));
            os << '\n';
        }
    }
}

// -- wide-network limit ------------------------------------------------------

namespace {

constexpr double kMaxCachedEntries = 4e6;

/// u_k, v_k, s_k of the feature expansion of (1/m) sum_j weight_j eta_j A(x_j, .)
struct Expansion {
    Vector u;  // P
    Matrix v;  // P x n
    Vector s;  // P
};

Expansion expand(const LimitState& state, const Vector& weights) {
    const Eigen::Index P = state.features.width(), n = state.features.dim();
    const auto m = static_cast<Eigen::Index>(state.quad.size());
    Expansion e{Vector::Zero(P), Matrix::Zero(P, n), Vector::Zero(P)};
    for (Eigen::Index j = 0; j < m; ++j) {
        const double wj = weights[j] * state.eta_quad[j];
        if (wj == 0.0) continue;
        const auto ju = static_cast<std::size_t>(j);
        UnitActivations local;
        const UnitActivations* units = nullptr;
        if (state.quad_units) {
            units = &(*state.quad_units)[ju];
        } else {
            local = unit_activations(state.features, state.quad[ju]);
            units = &local;
        }
        e.u.noalias() += wj * units->s;
        e.s.noalias() += wj * units->d1;
        e.v.noalias() += (wj * units->d1) * state.quad[ju].transpose();
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    e.u *= inv_m;
    e.v *= inv_m;
    e.s *= inv_m;
    return e;
}

/// g(y) = (1/P) sum_k [ u_k s_k(y) + c_k^2 s'_k(y) (v_k . y + s_k) ] and its derivatives.
EvalBundle expansion_bundle(const LimitState& state, const Expansion& e, const Point& y,
                            const UnitActivations& a, bool with_derivatives) {
    const NetworkParams& f = state.features;
    const double inv_p = 1.0 / static_cast<double>(f.width());
    const Vector c2 = f.c.cwiseAbs2();
    const Vector lin = e.v * y + e.s;
    EvalBundle out(y.size());
    out.value = inv_p * (e.u.dot(a.s) + c2.cwiseProduct(a.d1).dot(lin));
    if (!with_derivatives) return out;
    const Vector c2d1 = c2.cwiseProduct(a.d1);
    const Vector c2d2 = c2.cwiseProduct(a.d2);
    out.gradient = inv_p * (f.w.transpose() * (e.u.cwiseProduct(a.d1) + c2d2.cwiseProduct(lin)) +
                            e.v.transpose() * c2d1);
    const Vector diag = e.u.cwiseProduct(a.d2) + c2.cwiseProduct(a.d3).cwiseProduct(lin);
    const Matrix wv = f.w.transpose() * c2d2.asDiagonal() * e.v;
    out.hessian = inv_p * (f.w.transpose() * diag.asDiagonal() * f.w + wv + wv.transpose());
    return out;
}

const UnitActivations& quad_activations(const LimitState& state, std::size_t j, UnitActivations& scratch) {
    if (state.quad_units) return (*state.quad_units)[j];
    scratch = unit_activations(state.features, state.quad[j]);
    return scratch;
}

}  // namespace

LimitState make_limit_state(const Domain& domain, PointSet quad, const InitSpec& spec, Eigen::Index P) {
    if (quad.empty()) throw std::invalid_argument("make_limit_state: need at least one quadrature point");
    if (P < 1) throw std::invalid_argument("make_limit_state: P must be >= 1");
    LimitState st;
    st.features = init_params(spec, P, domain.dim());
    st.eta_quad.resize(static_cast<Eigen::Index>(quad.size()));
    for (std::size_t j = 0; j < quad.size(); ++j) st.eta_quad[static_cast<Eigen::Index>(j)] = domain.eta(quad[j]).value;
    st.coeffs = Vector::Zero(static_cast<Eigen::Index>(quad.size()));
    if (static_cast<double>(quad.size()) * static_cast<double>(P) <= kMaxCachedEntries) {
        auto cache = std::make_shared<std::vector<UnitActivations>>();
        cache->reserve(quad.size());
        for (const Point& x : quad) cache->push_back(unit_activations(st.features, x));
        st.quad_units = std::move(cache);
    }
    st.quad = std::move(quad);
    return st;
}

EvalBundle limit_q_bundle(const LimitState& state, const LimitProblem& problem, const Point& y) {
    const Expansion e = expand(state, state.coeffs);
    return compose_q(expansion_bundle(state, e, y, unit_activations(state.features, y), true), problem.domain.eta(y),
                     problem.boundary(y));
}

Vector limit_q_values(const LimitState& state, const LimitProblem& problem, const PointSet& ys) {
    const Expansion e = expand(state, state.coeffs);
    Vector out(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const Point& y = ys[i];
        const double g = expansion_bundle(state, e, y, unit_activations(state.features, y), false).value;
        const double eta = problem.domain.eta(y).value;
        out[static_cast<Eigen::Index>(i)] = g * eta + (1.0 - eta) * problem.boundary(y).value;
    }
    return out;
}

std::vector<LimitRow> limit_ode_integrate(LimitState& state, const LimitProblem& problem, const LimitOptions& opts) {
    if (!(opts.h > 0.0)) throw std::invalid_argument("limit_ode_integrate: h must be positive");
    if (opts.diagnostics_every < 1) throw std::invalid_argument("limit_ode_integrate: diagnostics_every must be >= 1");
    const auto m = static_cast<Eigen::Index>(state.quad.size());
    std::vector<LimitRow> rows;
    const double t0 = state.t;
    std::optional<double> initial_residual;
    Vector lq(m);
    UnitActivations scratch;

    for (std::size_t step = 0;; ++step) {
        const Expansion e = expand(state, state.coeffs);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const Point& x = state.quad[ju];
            const UnitActivations& a = quad_activations(state, ju, scratch);
            const EvalBundle q =
                compose_q(expansion_bundle(state, e, x, a, true), problem.domain.eta(x), problem.boundary(x));
            lq[j] = apply(problem.op, x, q);
            if (!std::isfinite(lq[j])) {
                std::ostringstream os;
                os << "limit ODE: " << nonfinite_diagnostic(problem.op, x, q, lq[j]) << " at step " << step;
                throw LimitBlowUp(os.str());
            }
        }
        const double residual = lq.squaredNorm() / static_cast<double>(m);
        if (!initial_residual) initial_residual = residual;
        if (residual > opts.blowup_factor * std::max(*initial_residual, 1e-300)) {
            std::ostringstream os;
            os << "limit ODE blew up at step " << step << ": residual " << residual;
            throw LimitBlowUp(os.str());
        }
        if (step % opts.diagnostics_every == 0 || step == opts.steps) {
            LimitRow row;
            row.step = step;
            row.t = state.t;
            row.residual = residual;
            // B_hat L Q at x_i = eta_i g_L(x_i), with g_L built from weights L Q(x_j).
            const Expansion eb = expand(state, lq);
            double bsq = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                const UnitActivations& a = quad_activations(state, iu, scratch);
                const double val = state.eta_quad[i] * expansion_bundle(state, eb, state.quad[iu], a, false).value;
                bsq += val * val;
            }
            row.b_residual = bsq / static_cast<double>(m);
            if (opts.validator) row.l2_err = opts.validator(state);
            rows.push_back(row);
        }
        if (step == opts.steps) break;
        state.coeffs += (opts.h * opts.alpha) * lq;
        state.t = t0 + static_cast<double>(step + 1) * opts.h;
    }
    return rows;
}

void write_limit_csv(std::ostream& os, const std::vector<LimitRow>& rows) {
    os << "t,residual,l2_err,b_residual\n";
    char buf[160];
    for (const LimitRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,", r.t, r.residual);
        os << buf;
        if (r.l2_err) {
            std::snprintf(buf, sizeof buf, "%.17g", *r.l2_err);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g\n", r.b_residual);
        os << buf;
    }
}

}  // namespace qpde
