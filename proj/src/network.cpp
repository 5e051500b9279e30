#include "qpde/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace qpde {

ActivationValues activation(ActivationKind kind, double z) {
    ActivationValues v;
    switch (kind) {
    case ActivationKind::sigmoid:
    case ActivationKind::corrupted_sigmoid: {
        // s and q = 1 - s, both computed without cancellation.
        double s, q;
        if (z >= 0.0) {
            const double e = std::exp(-z);
            s = 1.0 / (1.0 + e);
            q = e / (1.0 + e);
        } else {
            const double e = std::exp(z);
            s = e / (1.0 + e);
            q = 1.0 / (1.0 + e);
        }
        const double sq = s * q;
        v.s = s;
        v.d1 = sq;
        v.d2 = sq * (q - s);
        v.d3 = sq * (1.0 - 6.0 * sq);
        if (kind == ActivationKind::corrupted_sigmoid) v.d1 *= 1.01;
        break;
    }
    case ActivationKind::tanh: {
        const double t = std::tanh(z);
        const double sech2 = 1.0 - t * t;
        v.s = t;
        v.d1 = sech2;
        v.d2 = -2.0 * t * sech2;
        v.d3 = sech2 * (6.0 * t * t - 2.0);
        break;
    }
    }
    return v;
}

ActivationKind parse_activation(std::string_view name) {
    if (name == "sigmoid") return ActivationKind::sigmoid;
    if (name == "tanh") return ActivationKind::tanh;
    throw std::invalid_argument("unsupported activation '" + std::string(name) +
                                "': must be a bounded C^4 function (sigmoid | tanh)");
}

std::string_view activation_name(ActivationKind kind) {
    switch (kind) {
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::corrupted_sigmoid: return "corrupted_sigmoid";
    }
    return "unknown";
}

void validate_beta(double beta, bool allow_nontheoretical_beta) {
    if (!std::isfinite(beta)) throw std::invalid_argument("beta must be finite");
    if (!allow_nontheoretical_beta && !(beta > 0.5 && beta < 1.0))
        throw std::invalid_argument("beta = " + std::to_string(beta) +
                                    " is outside (0.5, 1); set allow_nontheoretical_beta to override");
}

NetworkParams::NetworkParams(Vector c_, Matrix w_, Vector b_, double beta_, ActivationKind act_,
                             bool allow_nontheoretical_beta)
    : c(std::move(c_)), w(std::move(w_)), b(std::move(b_)), beta(beta_), act(act_) {
    if (c.size() < 1) throw std::invalid_argument("NetworkParams: width must be >= 1");
    if (w.rows() != c.size() || b.size() != c.size())
        throw std::invalid_argument("NetworkParams: c, w, b disagree on width");
    if (w.cols() < 1) throw std::invalid_argument("NetworkParams: input dimension must be >= 1");
    if (!c.allFinite() || !w.allFinite() || !b.allFinite())
        throw std::invalid_argument("NetworkParams: non-finite entry");
    validate_beta(beta, allow_nontheoretical_beta);
}

double NetworkParams::scale() const { return std::pow(static_cast<double>(width()), -beta); }

Vector NetworkParams::flat() const {
    const Eigen::Index n = width(), d = dim();
    Vector theta(flat_size());
    theta.head(n) = c;
    for (Eigen::Index i = 0; i < n; ++i) theta.segment(n + i * d, d) = w.row(i).transpose();
    theta.tail(n) = b;
    return theta;
}

void NetworkParams::assign_flat(const Vector& theta) {
    require_dim("NetworkParams::assign_flat", flat_size(), theta.size());
    const Eigen::Index n = width(), d = dim();
    c = theta.head(n);
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) = theta.segment(n + i * d, d).transpose();
    b = theta.tail(n);
}

NetworkParams init_params(const InitSpec& spec, Eigen::Index width, int dim, double beta, ActivationKind act,
                          bool allow_nontheoretical_beta) {
    if (width < 1) throw std::invalid_argument("init_params: width must be >= 1");
    if (dim < 1) throw std::invalid_argument("init_params: dim must be >= 1");
    if (!(spec.c_bound > 0.0) || !(spec.w_std > 0.0) || !(spec.b_std > 0.0))
        throw std::invalid_argument("init_params: c_bound, w_std and b_std must be positive");
    Stream root(spec.seed);
    // One sub-stream per parameter group so widening the network keeps the
    // leading units' draws unchanged.
    Stream sc = root.split(0), sw = root.split(1), sb = root.split(2);
    Vector c(width), b(width);
    Matrix w(width, dim);
    for (Eigen::Index i = 0; i < width; ++i) {
        // uniform_open keeps |c| strictly below the bound.
        c[i] = sc.uniform(-spec.c_bound, spec.c_bound);
        for (int k = 0; k < dim; ++k) w(i, k) = spec.w_std * sw.normal();
        b[i] = spec.b_std * sb.normal();
    }
    return NetworkParams(std::move(c), std::move(w), std::move(b), beta, act, allow_nontheoretical_beta);
}

UnitActivations unit_activations(const NetworkParams& params, const Point& x) {
    require_dim("unit_activations", params.dim(), x.size());
    const Eigen::Index n = params.width();
    UnitActivations u{Vector(n), Vector(n), Vector(n), Vector(n)};
    const Vector z = params.w * x + params.b;
    for (Eigen::Index i = 0; i < n; ++i) {
        const ActivationValues a = activation(params.act, z[i]);
        u.s[i] = a.s;
        u.d1[i] = a.d1;
        u.d2[i] = a.d2;
        u.d3[i] = a.d3;
    }
    return u;
}

EvalBundle s_bundle(const NetworkParams& params, const Point& x, const UnitActivations& units) {
    const double sc = params.scale();
    EvalBundle out;
    out.value = sc * params.c.dot(units.s);
    out.gradient = sc * (params.w.transpose() * params.c.cwiseProduct(units.d1));
    const Vector weight = sc * params.c.cwiseProduct(units.d2);
    out.hessian = params.w.transpose() * weight.asDiagonal() * params.w;
    (void)x;
    return out;
}

EvalBundle s_bundle(const NetworkParams& params, const Point& x) {
    return s_bundle(params, x, unit_activations(params, x));
}

EvalBundle compose_q(const EvalBundle& s, const EvalBundle& eta, const EvalBundle& f) {
    const double one_minus_eta = 1.0 - eta.value;
    EvalBundle q;
    q.value = s.value * eta.value + one_minus_eta * f.value;
    q.gradient = eta.value * s.gradient + s.value * eta.gradient - f.value * eta.gradient +
                 one_minus_eta * f.gradient;
    const Vector diff_grad = s.gradient - f.gradient;
    q.hessian = eta.value * s.hessian + (s.value - f.value) * eta.hessian + one_minus_eta * f.hessian;
    q.hessian.noalias() += diff_grad * eta.gradient.transpose();
    q.hessian.noalias() += eta.gradient * diff_grad.transpose();
    return q;
}

EvalBundle q_bundle(const NetworkParams& params, const Domain& domain, const BoundaryData& boundary,
                    const Point& x) {
    require_dim("q_bundle", domain.dim(), x.size());
    return compose_q(s_bundle(params, x), domain.eta(x), boundary(x));
}

Vector ParamGradient::flat() const {
    const Eigen::Index n = dc.size(), d = dw.cols();
    Vector theta(n * (d + 2));
    theta.head(n) = dc;
    for (Eigen::Index i = 0; i < n; ++i) theta.segment(n + i * d, d) = dw.row(i).transpose();
    theta.tail(n) = db;
    return theta;
}

double ParamGradient::norm() const {
    return std::sqrt(dc.squaredNorm() + dw.squaredNorm() + db.squaredNorm());
}

ParamGradient param_grad_q(const NetworkParams& params, const Domain& domain, const Point& x) {
    require_dim("param_grad_q", domain.dim(), x.size());
    const UnitActivations u = unit_activations(params, x);
    const double k = domain.eta(x).value * params.scale();
    ParamGradient g;
    g.dc = k * u.s;
    g.db = k * params.c.cwiseProduct(u.d1);
    g.dw = g.db * x.transpose();
    return g;
}

// -- checkpoints ------------------------------------------------------------

namespace {

std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_real(const std::string& tok) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::runtime_error("checkpoint: malformed real '" + tok + "'");
    return v;
}

template <class Row>
void write_row(std::ostream& os, const char* key, const Row& values) {
    os << key;
    for (Eigen::Index i = 0; i < values.size(); ++i) os << ' ' << hexfloat(values[i]);
    os << '\n';
}

std::istringstream expect_line(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("checkpoint: missing record '" + key + "'");
    std::istringstream ls(line);
    std::string got;
    ls >> got;
    if (got != key) throw std::runtime_error("checkpoint: expected '" + key + "', found '" + got + "'");
    return ls;
}

Vector read_reals(std::istream& is, const std::string& key, Eigen::Index count) {
    auto ls = expect_line(is, key);
    Vector v(count);
    std::string tok;
    for (Eigen::Index i = 0; i < count; ++i) {
        if (!(ls >> tok)) throw std::runtime_error("checkpoint: record '" + key + "' is short");
        v[i] = parse_real(tok);
    }
    if (ls >> tok) throw std::runtime_error("checkpoint: record '" + key + "' is long");
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    const NetworkParams& p = ckpt.params;
    os << "qpde-checkpoint 1\n";
    os << "n " << p.dim() << '\n';
    os << "N " << p.width() << '\n';
    os << "beta " << hexfloat(p.beta) << '\n';
    os << "activation " << activation_name(p.act) << '\n';
    os << "seed " << ckpt.seed << '\n';
    os << "step " << ckpt.step << '\n';
    write_row(os, "c", p.c);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wr = p.w;
    write_row(os, "w", Eigen::Map<const Vector>(wr.data(), wr.size()));
    write_row(os, "b", p.b);
    if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    int version = 0;
    {
        auto ls = expect_line(is, "qpde-checkpoint");
        ls >> version;
        if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    }
    Eigen::Index dim = 0, width = 0;
    std::string tok;
    expect_line(is, "n") >> dim;
    expect_line(is, "N") >> width;
    if (dim < 1 || width < 1) throw std::runtime_error("checkpoint: bad shape");
    expect_line(is, "beta") >> tok;
    const double beta = parse_real(tok);
    expect_line(is, "activation") >> tok;
    const ActivationKind act =
        tok == "corrupted_sigmoid" ? ActivationKind::corrupted_sigmoid : parse_activation(tok);
    Checkpoint ck;
    expect_line(is, "seed") >> ck.seed;
    expect_line(is, "step") >> ck.step;
    Vector c = read_reals(is, "c", width);
    Vector wflat = read_reals(is, "w", width * dim);
    Vector b = read_reals(is, "b", width);
    Matrix w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        wflat.data(), width, dim);
    // Beta was validated when the run was configured; accept it as recorded.
    ck.params = NetworkParams(std::move(c), std::move(w), std::move(b), beta, act, true);
    return ck;
}

}  // namespace qpde
