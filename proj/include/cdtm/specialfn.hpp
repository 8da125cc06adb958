#pragma once

#include <span>
#include <vector>

namespace cdtm {

/// Smallest argument accepted by the Dirichlet helpers. Callers clamp to it.
inline constexpr double kMinDirichletParam = 1e-10;

/// ln Gamma(x) for x > 0. Throws DomainError otherwise.
double log_gamma(double x);

/// Digamma, the first derivative of ln Gamma. Throws DomainError for x <= 0.
double digamma(double x);

/// Trigamma, the derivative of digamma; strictly positive for x > 0.
double trigamma(double x);

/// Tetragamma, the derivative of trigamma; strictly negative for x > 0.
double tetragamma(double x);

/// E_q[log theta_i] under Dirichlet(gamma): digamma(gamma_i) - digamma(sum gamma).
std::vector<double> expected_log_theta(std::span<const double> gamma);

/// Same as above, writing into `out` (size K). No allocation.
void expected_log_theta(std::span<const double> gamma, std::span<double> out);

/// E_q[sum_i theta_i log theta_i] under Dirichlet(gamma), i.e. the expected
/// negative entropy. Requires K >= 2. Result lies in [-log K, 0].
double expected_neg_entropy(std::span<const double> gamma);

}  // namespace cdtm
