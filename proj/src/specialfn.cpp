#include "cdtm/specialfn.hpp"

#include <cmath>
#include <string>

#include "cdtm/error.hpp"

namespace cdtm {
namespace {

// Asymptotic expansions are used once the argument has been shifted past
// this point; the first omitted term is below 1e-16 there.
constexpr double kAsymptoticFrom = 10.0;

void check_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be positive and finite, got " +
                      std::to_string(x));
  }
}

void check_gamma_vector(std::span<const double> gamma, const char* fn) {
  if (gamma.empty()) throw DomainError(std::string(fn) + ": empty parameter vector");
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw DomainError(std::string(fn) + ": Dirichlet parameters must be positive and finite");
    }
  }
}

}  // namespace

double log_gamma(double x) {
  check_positive(x, "log_gamma");
#if defined(__GLIBC__)
  // The reentrant variant does not write the global signgam.
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double digamma(double x) {
  check_positive(x, "digamma");
  double acc = 0.0;
  while (x < kAsymptoticFrom) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - sum_k B_2k / (2k x^2k)
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  check_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kAsymptoticFrom) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
  const double series =
      inv * inv2 *
      (1.0 / 6 -
       inv2 * (1.0 / 30 -
               inv2 * (1.0 / 42 -
                       inv2 * (1.0 / 30 -
                               inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * (7.0 / 6)))))));
  return acc + inv + 0.5 * inv2 + series;
}

double tetragamma(double x) {
  check_positive(x, "tetragamma");
  double acc = 0.0;
  while (x < kAsymptoticFrom) {
    acc -= 2.0 / (x * x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // -1/x^2 - 1/x^3 - sum_k (2k+1) B_2k / x^(2k+2)
  const double series =
      inv2 * inv2 *
      (0.5 -
       inv2 * (1.0 / 6 -
               inv2 * (1.0 / 6 -
                       inv2 * (3.0 / 10 -
                               inv2 * (5.0 / 6 - inv2 * (691.0 / 210 - inv2 * (35.0 / 2)))))));
  return acc - inv2 - inv2 * inv - series;
}

void expected_log_theta(std::span<const double> gamma, std::span<double> out) {
  check_gamma_vector(gamma, "expected_log_theta");
  if (out.size() != gamma.size()) throw DomainError("expected_log_theta: output size mismatch");
  double total = 0.0;
  for (double g : gamma) total += g;
  const double psi_total = digamma(total);
  for (std::size_t i = 0; i < gamma.size(); ++i) out[i] = digamma(gamma[i]) - psi_total;
}

std::vector<double> expected_log_theta(std::span<const double> gamma) {
  std::vector<double> out(gamma.size());
  expected_log_theta(gamma, out);
  return out;
}

double expected_neg_entropy(std::span<const double> gamma) {
  check_gamma_vector(gamma, "expected_neg_entropy");
  if (gamma.size() < 2) throw DomainError("expected_neg_entropy: need K >= 2");
  const auto k = static_cast<double>(gamma.size());
  double total = 0.0;
  double weighted = 0.0;
  for (double g : gamma) {
    total += g;
    weighted += g * digamma(g);
  }
  return weighted / total - digamma(total) + (k - 1.0) / total;
}

}  // namespace cdtm
