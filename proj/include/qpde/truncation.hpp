#pragma once

#include <string_view>

namespace qpde {

enum class TruncationMode { identity, smooth };

TruncationMode parse_truncation_mode(std::string_view name);
std::string_view truncation_mode_name(TruncationMode mode);

struct TruncationValues {
    double psi = 0.0;
    double psi_prime = 0.0;
    double F = 0.0;  // psi * psi'
};

/// Smooth truncation psi^N: the identity on [-N^delta, N^delta], saturating
/// outside through a Gaussian tail,
///   psi(x) = a + (sqrt(pi)/2) erf(x - a)   for x > a = N^delta,
/// and odd. In identity mode psi(x) = x.
class Truncation {
public:
    Truncation() = default;
    Truncation(TruncationMode mode, double delta, double width);

    static Truncation identity() { return {}; }
    /// delta = (1 - beta) / 4, which lies inside (0, (1 - beta)/2).
    static double default_delta(double beta) { return (1.0 - beta) / 4.0; }

    [[nodiscard]] TruncationMode mode() const { return mode_; }
    [[nodiscard]] double delta() const { return delta_; }
    [[nodiscard]] double threshold() const { return threshold_; }

    [[nodiscard]] TruncationValues eval(double x) const;
    [[nodiscard]] double F(double x) const { return eval(x).F; }

private:
    TruncationMode mode_ = TruncationMode::identity;
    double delta_ = 0.0;
    double threshold_ = 0.0;
};

/// |F(x) - x| <= 2|x| 1{|x| >= N^delta}. Smooth mode only.
bool f_error_bound_check(const Truncation& t, double x);

/// Rejects delta outside (0, (1 - beta)/2).
void validate_delta(double delta, double beta);

}  // namespace qpde
