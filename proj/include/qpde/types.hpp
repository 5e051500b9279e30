#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;
using PointSet = std::vector<Point>;

/// Value, spatial gradient and spatial Hessian of a scalar field at one point.
/// This is exactly what a second-order operator consumes.
struct EvalBundle {
    double value = 0.0;
    Vector gradient;
    Matrix hessian;

    EvalBundle() = default;
    explicit EvalBundle(Eigen::Index dim)
        : gradient(Vector::Zero(dim)), hessian(Matrix::Zero(dim, dim)) {}

    [[nodiscard]] Eigen::Index dim() const { return gradient.size(); }

    void set_zero() {
        value = 0.0;
        gradient.setZero();
        hessian.setZero();
    }

    [[nodiscard]] bool all_finite() const {
        return std::isfinite(value) && gradient.allFinite() && hessian.allFinite();
    }
};

class InputDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DimensionMismatch : public std::invalid_argument {
public:
    DimensionMismatch(const std::string& what, Eigen::Index expected, Eigen::Index got)
        : std::invalid_argument(what + ": expected dimension " + std::to_string(expected) +
                                ", got " + std::to_string(got)) {}
};

inline void require_dim(const char* what, Eigen::Index expected, Eigen::Index got) {
    if (expected != got) throw DimensionMismatch(what, expected, got);
}

}  // namespace qpde
