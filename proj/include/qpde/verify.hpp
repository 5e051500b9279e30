#pragma once

#include "qpde/config.hpp"
#include "qpde/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qpde {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;   // worst value seen
    double threshold = 0.0;  // pass iff measured is on the right side of this
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    std::size_t instances = 100;
    // corrupted_sigmoid exercises the falsification path of the derivative checks.
    ActivationKind activation = ActivationKind::sigmoid;
};

// Derivative checks against central finite differences; measured = worst
// normwise relative error, threshold 1e-5.
CheckResult check_param_gradient(const VerifyOptions& opts);
CheckResult check_spatial_gradient(const VerifyOptions& opts);
CheckResult check_spatial_hessian(const VerifyOptions& opts);
CheckResult check_kernel_derivatives(const VerifyOptions& opts);

/// |Q - f| on 500 sphere points for random networks and nonzero f.
CheckResult check_boundary_pinning(const VerifyOptions& opts);

/// Identity region, bounds on psi and psi', monotonicity, the |F(x) - x| bound
/// and the Lipschitz quotient of F, for N in {16, 256, 4096}.
std::vector<CheckResult> check_truncation_laws(const VerifyOptions& opts);

/// |L u*| at 500 interior points for each bundled problem.
std::vector<CheckResult> check_oracle_residuals(const VerifyOptions& opts);

/// 20 random eta-vanishing pairs for the model operator: margin >= -3 sigma.
CheckResult check_monotonicity_model(const VerifyOptions& opts);
/// Same pairs with the declared gamma inflated to 10: violations must show up.
CheckResult check_monotonicity_falsification(const VerifyOptions& opts);

/// gamma* = 0 for (nu = 0, a = I, uniform density) and for the stationary
/// Gaussian fixture nu = -x, a = I, f = exp(-|x|^2 / 2).
std::vector<CheckResult> check_gamma_star(const VerifyOptions& opts);

std::vector<CheckResult> run_property_suite(const VerifyOptions& opts);

/// One line per check: PASS/FAIL, name, measured, threshold, detail.
void print_results(std::ostream& os, const std::vector<CheckResult>& results);

int cmd_verify(const ExperimentConfig& cfg, std::ostream& out,
               ActivationKind activation = ActivationKind::sigmoid);

}  // namespace qpde
