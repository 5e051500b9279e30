#include "qpde/domain.hpp"

#include <cmath>

namespace qpde {

BallDomain::BallDomain(int dim_, double radius_, double boundary_rel_tol_)
    : dim(dim_), radius(radius_), boundary_rel_tol(boundary_rel_tol_) {
    if (dim < 1) throw InputDomainError("BallDomain: dim must be >= 1");
    if (!(radius > 0.0)) throw InputDomainError("BallDomain: radius must be positive");
}

bool BallDomain::contains(const Point& x) const {
    require_dim("BallDomain::contains", dim, x.size());
    return x.norm() < radius;
}

bool BallDomain::on_boundary(const Point& x) const {
    require_dim("BallDomain::on_boundary", dim, x.size());
    return std::abs(x.norm() - radius) <= boundary_rel_tol * radius;
}

EvalBundle eta_bundle(const BallDomain& domain, const Point& x) {
    require_dim("eta_bundle", domain.dim, x.size());
    EvalBundle out(domain.dim);
    out.value = domain.radius * domain.radius - x.squaredNorm();
    out.gradient = -2.0 * x;
    out.hessian.diagonal().setConstant(-2.0);
    return out;
}

namespace {

Point gaussian_direction(int dim, Stream& stream) {
    Point g(dim);
    for (;;) {
        for (int k = 0; k < dim; ++k) g[k] = stream.normal();
        const double nrm = g.norm();
        if (nrm > 0.0) return g / nrm;
    }
}

}  // namespace

PointSet sample_interior(const BallDomain& domain, std::size_t m, Stream& stream) {
    PointSet pts;
    pts.reserve(m);
    const double inv_dim = 1.0 / domain.dim;
    while (pts.size() < m) {
        Point dir = gaussian_direction(domain.dim, stream);
        const double r = domain.radius * std::pow(stream.uniform_open(), inv_dim);
        Point x = r * dir;
        if (x.norm() < domain.radius) pts.push_back(std::move(x));
    }
    return pts;
}

PointSet sample_sphere(const BallDomain& domain, double r, std::size_t m, Stream& stream) {
    if (!(r >= 0.0)) throw InputDomainError("sample_sphere: radius must be non-negative");
    if (r > domain.radius * (1.0 + domain.boundary_rel_tol))
        throw InputDomainError("sample_sphere: radius exceeds the domain radius");
    PointSet pts;
    pts.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (r == 0.0) {
            pts.push_back(Point::Zero(domain.dim));
        } else {
            pts.push_back(r * gaussian_direction(domain.dim, stream));
        }
    }
    return pts;
}

EvalBundle BoundaryData::operator()(const Point& x) const {
    if (fn_) return fn_(x);
    return EvalBundle(x.size());
}

Domain::Domain(int dim, Membership contains, EtaFn eta, Sampler sampler)
    : dim_(dim), contains_(std::move(contains)), eta_(std::move(eta)), sampler_(std::move(sampler)) {
    if (dim_ < 1) throw InputDomainError("Domain: dim must be >= 1");
    if (!contains_ || !eta_ || !sampler_) throw std::invalid_argument("Domain: all three callables are required");
}

Domain::Domain(const BallDomain& ball)
    : dim_(ball.dim),
      contains_([ball](const Point& x) { return ball.contains(x); }),
      eta_([ball](const Point& x) { return eta_bundle(ball, x); }),
      sampler_([ball](std::size_t m, Stream& s) { return sample_interior(ball, m, s); }),
      ball_(ball),
      has_ball_(true) {}

}  // namespace qpde
