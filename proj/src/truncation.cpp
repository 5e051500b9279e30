#include "qpde/truncation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qpde {

TruncationMode parse_truncation_mode(std::string_view name) {
    if (name == "identity") return TruncationMode::identity;
    if (name == "smooth") return TruncationMode::smooth;
    throw std::invalid_argument("unknown truncation mode '" + std::string(name) + "' (identity | smooth)");
}

std::string_view truncation_mode_name(TruncationMode mode) {
    return mode == TruncationMode::identity ? "identity" : "smooth";
}

void validate_delta(double delta, double beta) {
    if (!(delta > 0.0 && delta < (1.0 - beta) / 2.0))
        throw std::invalid_argument("truncation delta = " + std::to_string(delta) + " must lie in (0, " +
                                    std::to_string((1.0 - beta) / 2.0) + ")");
}

Truncation::Truncation(TruncationMode mode, double delta, double width) : mode_(mode), delta_(delta) {
    if (mode_ == TruncationMode::smooth) {
        if (!(delta > 0.0)) throw std::invalid_argument("Truncation: delta must be positive");
        if (!(width >= 1.0)) throw std::invalid_argument("Truncation: width must be >= 1");
        threshold_ = std::pow(width, delta);
    }
}

TruncationValues Truncation::eval(double x) const {
    if (mode_ == TruncationMode::identity || std::abs(x) <= threshold_) return {x, 1.0, x};
    const double a = threshold_;
    const double excess = std::abs(x) - a;
    // integral_0^e exp(-s^2) ds = (sqrt(pi)/2) erf(e)
    const double mag = a + 0.5 * std::sqrt(std::numbers::pi) * std::erf(excess);
    const double psi = std::copysign(mag, x);
    const double dpsi = std::exp(-excess * excess);
    return {psi, dpsi, psi * dpsi};
}

bool f_error_bound_check(const Truncation& t, double x) {
    if (t.mode() != TruncationMode::smooth) throw std::invalid_argument("f_error_bound_check: smooth mode only");
    const double indicator = std::abs(x) >= t.threshold() ? 1.0 : 0.0;
    return std::abs(t.F(x) - x) <= 2.0 * std::abs(x) * indicator;
}

}  // namespace qpde
