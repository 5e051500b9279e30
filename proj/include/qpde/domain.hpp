#pragma once

#include "qpde/random.hpp"
#include "qpde/types.hpp"

#include <cstddef>
#include <functional>

namespace qpde {

/// Open ball of radius `radius` centred at the origin of R^dim.
struct BallDomain {
    int dim = 1;
    double radius = 1.0;
    double boundary_rel_tol = 1e-9;

    BallDomain() = default;
    BallDomain(int dim_, double radius_ = 1.0, double boundary_rel_tol_ = 1e-9);

    [[nodiscard]] bool contains(const Point& x) const;
    [[nodiscard]] bool on_boundary(const Point& x) const;
};

/// Auxiliary function eta(x) = radius^2 - |x|^2 of the ball. For the unit ball
/// this is 1 - |x|^2: positive inside, zero on the sphere, gradient -2x.
EvalBundle eta_bundle(const BallDomain& domain, const Point& x);

/// Points i.i.d. uniform on the open ball: Gaussian direction scaled by
/// radius * u^(1/n). Draws that land on the boundary are redrawn.
PointSet sample_interior(const BallDomain& domain, std::size_t m, Stream& stream);

/// Points uniform on the sphere |x| = r (Gaussian direction, normalized).
PointSet sample_sphere(const BallDomain& domain, double r, std::size_t m, Stream& stream);

/// Continuation of the Dirichlet data into the interior, with its derivatives.
/// Default-constructed data is f = 0.
class BoundaryData {
public:
    using Fn = std::function<EvalBundle(const Point&)>;

    BoundaryData() = default;
    explicit BoundaryData(Fn fn) : fn_(std::move(fn)) {}

    [[nodiscard]] bool is_zero() const { return !fn_; }
    [[nodiscard]] EvalBundle operator()(const Point& x) const;

private:
    Fn fn_;
};

/// Type-erased domain: membership, auxiliary function and sampler. The unit
/// ball is built in; anything else is supplied by the caller as a triple.
class Domain {
public:
    using Membership = std::function<bool(const Point&)>;
    using EtaFn = std::function<EvalBundle(const Point&)>;
    using Sampler = std::function<PointSet(std::size_t, Stream&)>;

    Domain(int dim, Membership contains, EtaFn eta, Sampler sampler);
    explicit Domain(const BallDomain& ball);

    static Domain unit_ball(int dim) { return Domain(BallDomain(dim)); }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] bool contains(const Point& x) const { return contains_(x); }
    [[nodiscard]] EvalBundle eta(const Point& x) const { return eta_(x); }
    [[nodiscard]] PointSet sample(std::size_t m, Stream& stream) const { return sampler_(m, stream); }

    /// Present when the domain was built from a ball.
    [[nodiscard]] const BallDomain* ball() const { return has_ball_ ? &ball_ : nullptr; }

private:
    int dim_;
    Membership contains_;
    EtaFn eta_;
    Sampler sampler_;
    BallDomain ball_;
    bool has_ball_ = false;
};

}  // namespace qpde
