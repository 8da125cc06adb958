#include "cdtm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "cdtm/error.hpp"
#include "cdtm/kernels.hpp"
#include "cdtm/specialfn.hpp"

namespace cdtm {
namespace {

constexpr double kFlatCurvature = 1e-12;

// Armijo test. Near the optimum the predicted gain of a full step can fall
// below what the objective resolves in floating point; such a step is taken
// unless the objective drops by more than that rounding level.
bool sufficient_increase(double f0, double f1, double alpha, double slope,
                         const TrainConfig& config) {
  if (f1 >= f0 + config.armijo_delta * alpha * slope) return true;
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0));
  return alpha == 1.0 && slope <= noise && f1 >= f0 - noise;
}

void check_shapes(std::span<const double> gamma, std::span<const double> zeta,
                  std::span<const double> colsums) {
  if (gamma.size() < 2 || zeta.size() != gamma.size() || colsums.size() != gamma.size()) {
    throw DomainError("gamma objective: inconsistent or too small K");
  }
}

struct GammaSums {
  double s = 0.0;      // sum gamma
  double a = 0.0;      // sum (zeta + colsum)
  double gpsi = 0.0;   // sum gamma psi(gamma)
};

GammaSums gamma_sums(std::span<const double> gamma, std::span<const double> zeta,
                     std::span<const double> colsums) {
  GammaSums out;
  for (std::size_t l = 0; l < gamma.size(); ++l) {
    out.s += gamma[l];
    out.a += zeta[l] + colsums[l];
    out.gpsi += gamma[l] * digamma(gamma[l]);
  }
  return out;
}

}  // namespace

double elbo_gamma_part(std::span<const double> gamma, std::span<const double> zeta,
                       std::span<const double> phi_colsums, double lambda) {
  check_shapes(gamma, zeta, phi_colsums);
  double s = 0.0;
  for (double g : gamma) s += g;
  const double psi_s = digamma(s);
  double value = -log_gamma(s);
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    value += (digamma(gamma[i]) - psi_s) * (zeta[i] + phi_colsums[i] - gamma[i]) +
             log_gamma(gamma[i]);
  }
  if (lambda != 0.0) value += lambda * expected_neg_entropy(gamma);
  return value;
}

double grad_gamma(std::span<const double> gamma, std::span<const double> zeta,
                  std::span<const double> phi_colsums, double lambda, std::size_t i) {
  check_shapes(gamma, zeta, phi_colsums);
  const GammaSums t = gamma_sums(gamma, zeta, phi_colsums);
  const double k = static_cast<double>(gamma.size());
  const double gi = gamma[i];
  const double tri_i = trigamma(gi);
  const double tri_s = trigamma(t.s);
  double g = tri_i * (zeta[i] + phi_colsums[i] - gi) - tri_s * (t.a - t.s);
  g += lambda * ((digamma(gi) + gi * tri_i) / t.s - t.gpsi / (t.s * t.s) - tri_s -
                 (k - 1.0) / (t.s * t.s));
  return g;
}

double hess_gamma_diag(std::span<const double> gamma, std::span<const double> zeta,
                       std::span<const double> phi_colsums, double lambda, std::size_t i) {
  check_shapes(gamma, zeta, phi_colsums);
  const GammaSums t = gamma_sums(gamma, zeta, phi_colsums);
  const double k = static_cast<double>(gamma.size());
  const double gi = gamma[i];
  const double tri_i = trigamma(gi);
  const double tet_i = tetragamma(gi);
  const double tet_s = tetragamma(t.s);
  const double s2 = t.s * t.s;
  double h = tet_i * (zeta[i] + phi_colsums[i] - gi) - tri_i - tet_s * (t.a - t.s) + trigamma(t.s);
  h += lambda * ((2.0 * tri_i + gi * tet_i) / t.s - 2.0 * (digamma(gi) + gi * tri_i) / s2 +
                 2.0 * (k - 1.0 + t.gpsi) / (s2 * t.s) - tet_s);
  return h;
}

// ---------------------------------------------------------------------------

CoordinateObjective::CoordinateObjective(std::span<const double> gamma,
                                         std::span<const double> zeta,
                                         std::span<const double> phi_colsums, double lambda,
                                         std::size_t i)
    : target_(zeta[i] + phi_colsums[i]),
      total_a_(0.0),
      rest_sum_(0.0),
      rest_gpsi_(0.0),
      lambda_(lambda),
      k_minus_1_(static_cast<double>(gamma.size()) - 1.0) {
  check_shapes(gamma, zeta, phi_colsums);
  for (std::size_t l = 0; l < gamma.size(); ++l) {
    total_a_ += zeta[l] + phi_colsums[l];
    if (l == i) continue;
    rest_sum_ += gamma[l];
    if (lambda_ != 0.0) rest_gpsi_ += gamma[l] * digamma(gamma[l]);
  }
}

double CoordinateObjective::value(double x) const {
  const double s = rest_sum_ + x;
  const double psi_x = digamma(x);
  const double psi_s = digamma(s);
  double v = psi_x * (target_ - x) + log_gamma(x) - psi_s * (total_a_ - s) - log_gamma(s);
  if (lambda_ != 0.0) v += lambda_ * ((rest_gpsi_ + x * psi_x) / s - psi_s + k_minus_1_ / s);
  return v;
}

double CoordinateObjective::derivative(double x) const {
  const double s = rest_sum_ + x;
  const double tri_x = trigamma(x);
  const double tri_s = trigamma(s);
  double d = tri_x * (target_ - x) - tri_s * (total_a_ - s);
  if (lambda_ != 0.0) {
    const double gpsi = rest_gpsi_ + x * digamma(x);
    d += lambda_ * ((digamma(x) + x * tri_x) / s - gpsi / (s * s) - tri_s - k_minus_1_ / (s * s));
  }
  return d;
}

double CoordinateObjective::second_derivative(double x) const {
  const double s = rest_sum_ + x;
  const double tri_x = trigamma(x);
  const double tet_x = tetragamma(x);
  const double tet_s = tetragamma(s);
  double h = tet_x * (target_ - x) - tri_x - tet_s * (total_a_ - s) + trigamma(s);
  if (lambda_ != 0.0) {
    const double psi_x = digamma(x);
    const double gpsi = rest_gpsi_ + x * psi_x;
    const double s2 = s * s;
    h += lambda_ * ((2.0 * tri_x + x * tet_x) / s - 2.0 * (psi_x + x * tri_x) / s2 +
                    2.0 * (k_minus_1_ + gpsi) / (s2 * s) - tet_s);
  }
  return h;
}

namespace {

// Hessian of L[gamma] as diag(d) + c 11' + u 1' + 1 u'.
struct HessianParts {
  std::vector<double> d;
  std::vector<double> u;
  double c = 0.0;
};

HessianParts hessian_parts(std::span<const double> gamma, std::span<const double> zeta,
                           std::span<const double> colsums, double lambda) {
  const std::size_t k = gamma.size();
  const GammaSums t = gamma_sums(gamma, zeta, colsums);
  const double tet_s = tetragamma(t.s);
  const double s2 = t.s * t.s;
  HessianParts h;
  h.d.resize(k);
  h.u.assign(k, 0.0);
  h.c = trigamma(t.s) - tet_s * (t.a - t.s);
  if (lambda != 0.0) {
    h.c += lambda * (2.0 * (t.gpsi + static_cast<double>(k) - 1.0) / (s2 * t.s) - tet_s);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double g = gamma[i];
    const double tri = trigamma(g);
    const double tet = tetragamma(g);
    h.d[i] = tet * (zeta[i] + colsums[i] - g) - tri;
    if (lambda != 0.0) {
      h.d[i] += lambda * (2.0 * tri + g * tet) / t.s;
      h.u[i] = -lambda * (digamma(g) + g * tri) / s2;
    }
  }
  return h;
}

}  // namespace

Matrix hess_gamma(std::span<const double> gamma, std::span<const double> zeta,
                  std::span<const double> phi_colsums, double lambda) {
  check_shapes(gamma, zeta, phi_colsums);
  const HessianParts h = hessian_parts(gamma, zeta, phi_colsums, lambda);
  const std::size_t k = gamma.size();
  Matrix out(k, k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out(i, j) = h.c + (h.u[i] + h.u[j]);
    out(i, i) += h.d[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Damped Newton ascent step on a 1-D objective, shared by the coordinate and
// block fallback.
template <class Objective>
NewtonStep damped_newton(const Objective& f, double x, double lower, double tol,
                         const TrainConfig& config) {
  NewtonStep step;
  step.value = x;

  const double d1 = f.derivative(x);
  const double d2 = f.second_derivative(x);
  if (d2 < -kFlatCurvature) {
    step.delta = -d1 / d2;
  } else {
    // gradient step in log scale, at most halving or doubling x
    step.fallback = true;
    const double scale = std::max(x, 1.0);
    step.delta = std::clamp(d1 * scale, -0.5 * x, scale);
  }
  if (!(std::abs(step.delta) >= tol)) {  // also catches NaN
    step.converged = true;
    return step;
  }

  const double f0 = f.value(x);
  const double slope = d1 * step.delta;  // > 0 for an ascent direction
  step.objective_before = f0;
  double alpha = 1.0;
  for (std::size_t b = 0; b <= config.max_backtracks; ++b, alpha *= config.backtrack_rho) {
    const double candidate = x + alpha * step.delta;
    if (!(candidate >= lower)) continue;
    const double f1 = f.value(candidate);
    if (sufficient_increase(f0, f1, alpha, slope, config)) {
      step.value = candidate;
      step.alpha = alpha;
      step.backtracks = b;
      step.objective_after = f1;
      return step;
    }
  }
  step.stalled = true;
  step.objective_after = f0;
  return step;
}

}  // namespace

NewtonStep newton_coordinate_step(std::span<const double> gamma, std::size_t i,
                                  std::span<const double> zeta,
                                  std::span<const double> phi_colsums, double lambda,
                                  const TrainConfig& config) {
  const CoordinateObjective f(gamma, zeta, phi_colsums, lambda, i);
  return damped_newton(f, gamma[i], config.gamma_floor, config.newton_tol, config);
}

BlockStep newton_block_step(std::span<const double> gamma, std::span<const double> zeta,
                            std::span<const double> phi_colsums, double lambda,
                            const TrainConfig& config) {
  check_shapes(gamma, zeta, phi_colsums);
  const std::size_t k = gamma.size();
  BlockStep step;
  step.value.assign(gamma.begin(), gamma.end());
  step.delta.assign(k, 0.0);

  std::vector<double> grad(k);
  {
    const GammaSums t = gamma_sums(gamma, zeta, phi_colsums);
    const double tri_s = trigamma(t.s);
    const double s2 = t.s * t.s;
    const double kk = static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double g = gamma[i];
      const double tri = trigamma(g);
      grad[i] = tri * (zeta[i] + phi_colsums[i] - g) - tri_s * (t.a - t.s);
      if (lambda != 0.0) {
        grad[i] += lambda * ((digamma(g) + g * tri) / t.s - t.gpsi / s2 - tri_s - (kk - 1.0) / s2);
      }
    }
  }

  // Solves (H - mu I) x = -grad by Woodbury with U = [1 u] and
  // C = [[c, 1], [1, 0]], so C^-1 = [[0, 1], [1, -c]]. Returns the slope grad.x.
  const HessianParts h = hessian_parts(gamma, zeta, phi_colsums, lambda);
  auto solve = [&](double mu) {
    double m11 = 0.0, m12 = 1.0, m22 = -h.c;  // C^-1 + U' D^-1 U
    double r1 = 0.0, r2 = 0.0;                 // U' D^-1 (-grad)
    for (std::size_t i = 0; i < k; ++i) {
      const double d = h.d[i] - mu;
      if (!(std::abs(d) > kFlatCurvature)) return 0.0;
      m11 += 1.0 / d;
      m12 += h.u[i] / d;
      m22 += h.u[i] * h.u[i] / d;
      r1 -= grad[i] / d;
      r2 -= h.u[i] * grad[i] / d;
    }
    const double det = m11 * m22 - m12 * m12;
    if (!(std::abs(det) > 0.0)) return 0.0;
    const double y1 = (m22 * r1 - m12 * r2) / det;
    const double y2 = (m11 * r2 - m12 * r1) / det;
    double slope = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      step.delta[i] = (-grad[i] - y1 - h.u[i] * y2) / (h.d[i] - mu);
      slope += grad[i] * step.delta[i];
    }
    return std::isfinite(slope) ? slope : 0.0;
  };

  double slope = solve(0.0);
  if (slope > 0.0) {
    double largest = 0.0;
    for (double x : step.delta) largest = std::max(largest, std::abs(x));
    // Converged, but the last (tiny) Newton step is still taken if it holds.
    step.converged = largest < config.newton_tol;
  } else {
    // Not an ascent direction: shift the spectrum down. Past the Gershgorin
    // bound H - mu I is negative definite and the direction always ascends.
    double bound = 0.0, umax = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      bound = std::max(bound, std::abs(h.d[i]));
      umax = std::max(umax, std::abs(h.u[i]));
    }
    bound += static_cast<double>(k) * (std::abs(h.c) + 2.0 * umax);
    for (double mu = 1e-6 * bound; slope <= 0.0 && mu <= 4.0 * bound; mu *= 10.0) {
      slope = solve(mu);
      step.damped = true;
    }
    if (!(slope > 0.0)) slope = solve(2.0 * bound);
    if (!(slope > 0.0)) {
      step.unusable = true;
      return step;
    }
  }

  const double f0 = elbo_gamma_part(gamma, zeta, phi_colsums, lambda);
  step.objective_before = f0;
  std::vector<double> candidate(k);
  double alpha = 1.0;
  const std::size_t tries = step.converged ? 1 : config.max_backtracks + 1;
  for (std::size_t b = 0; b < tries; ++b, alpha *= config.backtrack_rho) {
    bool feasible = true;
    for (std::size_t i = 0; i < k; ++i) {
      candidate[i] = gamma[i] + alpha * step.delta[i];
      feasible = feasible && candidate[i] >= config.gamma_floor;
    }
    if (!feasible) continue;
    const double f1 = elbo_gamma_part(candidate, zeta, phi_colsums, lambda);
    if (sufficient_increase(f0, f1, alpha, slope, config)) {
      step.value = candidate;
      step.alpha = alpha;
      step.backtracks = b;
      step.objective_after = f1;
      return step;
    }
  }
  step.stalled = !step.converged;
  step.objective_after = f0;
  return step;
}

// ---------------------------------------------------------------------------

EStepStats& EStepStats::operator+=(const EStepStats& o) {
  iterations += o.iterations;
  converged = converged && o.converged;
  newton_steps += o.newton_steps;
  block_steps += o.block_steps;
  stalls += o.stalls;
  fallbacks += o.fallbacks;
  return *this;
}

TopicLogWeights::TopicLogWeights(const ModelParams& model)
    : by_word(model.vocab_size(), model.num_topics()) {
  for (std::size_t i = 0; i < model.num_topics(); ++i) {
    for (std::size_t j = 0; j < model.vocab_size(); ++j) by_word(j, i) = std::log(model.eta(i, j));
  }
}

namespace {

// Writes the new phi rows into `phi`; returns the count-weighted sum of
// absolute changes.
double refresh_phi(const BagOfWords& bow, std::span<const double> elog,
                   const TopicLogWeights& logw, Matrix& phi) {
  const std::size_t k = elog.size();
  double change = 0.0;
  std::vector<double> row(k);
  for (std::size_t u = 0; u < bow.types.size(); ++u) {
    const auto lw = logw.by_word.row(bow.types[u]);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = lw[i] + elog[i];
      peak = std::max(peak, row[i]);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - peak);
      norm += row[i];
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw NumericalError("update_phi: unnormalizable row");
    }
    auto out = phi.row(u);
    double row_change = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double v = row[i] / norm;
      row_change += std::abs(v - out[i]);
      out[i] = v;
    }
    change += bow.counts[u] * row_change;
  }
  return change;
}

void phi_colsums(const BagOfWords& bow, const Matrix& phi, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t u = 0; u < bow.types.size(); ++u) {
    const auto r = phi.row(u);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bow.counts[u] * r[i];
  }
}

}  // namespace

Matrix update_phi(const BagOfWords& bow, std::span<const double> gamma, const ModelParams& model) {
  const TopicLogWeights logw(model);
  Matrix phi(bow.types.size(), gamma.size(), 0.0);
  refresh_phi(bow, expected_log_theta(gamma), logw, phi);
  return phi;
}

EStepStats estep_document(const BagOfWords& bow, const ModelParams& model,
                          const TopicLogWeights& logw, double lambda,
                          const TrainConfig& config, DocVariational& state,
                          const StepObserver* observer, std::size_t doc_index) {
  const std::size_t k = model.num_topics();
  const std::span<const double> zeta(model.zeta);
  if (state.gamma.size() != k || state.phi.rows() != bow.types.size() || state.phi.cols() != k) {
    throw DataError("estep_document: variational state does not match document/model");
  }
  EStepStats stats;
  std::vector<double> elog(k);
  std::vector<double> colsums(k);
  std::vector<double> before;
  const double entries = std::max(bow.total, 1.0) * static_cast<double>(k);
  const bool observe = observer != nullptr && *observer;

  auto notify = [&](StepKind kind, std::size_t i) {
    (*observer)(StepEvent{doc_index, kind, i, before, state.gamma, zeta, colsums, lambda});
  };

  // One ascending pass of per-coordinate Newton solves; returns the largest move.
  auto coordinate_sweep = [&]() {
    double moved = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double start = state.gamma[i];
      for (std::size_t t = 0; t < config.newton_max_iters; ++t) {
        const NewtonStep step =
            newton_coordinate_step(state.gamma, i, zeta, colsums, lambda, config);
        if (step.fallback) ++stats.fallbacks;
        if (step.converged) break;
        if (step.stalled) {
          ++stats.stalls;
          break;
        }
        ++stats.newton_steps;
        if (observe) before = state.gamma;
        state.gamma[i] = step.value;
        if (observe) notify(StepKind::kCoordinate, i);
      }
      moved = std::max(moved, std::abs(state.gamma[i] - start));
    }
    return moved;
  };

  for (std::size_t it = 0; it < config.estep_max_iters; ++it) {
    ++stats.iterations;
    expected_log_theta(state.gamma, elog);
    const double phi_change = refresh_phi(bow, elog, logw, state.phi) / entries;
    phi_colsums(bow, state.phi, colsums);

    const std::vector<double> iter_start = state.gamma;
    if (!config.block_newton) {
      coordinate_sweep();
    } else {
      for (std::size_t t = 0; t < config.newton_max_iters; ++t) {
        const BlockStep step = newton_block_step(state.gamma, zeta, colsums, lambda, config);
        if (step.alpha > 0.0) {
          ++stats.block_steps;
          if (observe) before = state.gamma;
          state.gamma = step.value;
          if (observe) notify(StepKind::kBlock, 0);
        }
        if (step.converged) break;
        if (step.alpha > 0.0) continue;
        if (step.stalled) ++stats.stalls;
        if (coordinate_sweep() < config.newton_tol) break;
      }
    }
    double max_move = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      max_move = std::max(max_move, std::abs(state.gamma[i] - iter_start[i]));
    }

    if (max_move < config.newton_tol && phi_change < config.estep_phi_tol) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

std::pair<DocVariational, EStepStats> estep_document(const Document& doc,
                                                     const ModelParams& model, double lambda,
                                                     const TrainConfig& config) {
  if (doc.tokens.empty()) throw DataError("estep_document: empty document");
  const BagOfWords bow = bag_of_words(doc);
  const TopicLogWeights logw(model);
  DocVariational state = init_doc_variational(bow, model.zeta);
  EStepStats stats = estep_document(bow, model, logw, lambda, config, state);
  return {std::move(state), stats};
}

// ---------------------------------------------------------------------------

Matrix mstep(const std::vector<BagOfWords>& bows, const std::vector<DocVariational>& per_doc,
             std::size_t vocab_size, Reduction reduction) {
  if (per_doc.empty()) throw DataError("mstep: no documents");
  const std::size_t k = per_doc.front().gamma.size();
  Matrix eta = reduction == Reduction::kDeterministic
                   ? topic_word_counts_serial(bows, per_doc, k, vocab_size)
                   : topic_word_counts(bows, per_doc, k, vocab_size);
  normalize_topic_rows(eta);
  return eta;
}

ElboBreakdown& ElboBreakdown::operator+=(const ElboBreakdown& o) {
  log_likelihood_terms += o.log_likelihood_terms;
  entropy_of_q += o.entropy_of_q;
  penalty_term += o.penalty_term;
  total += o.total;
  return *this;
}

ElboBreakdown document_elbo(const BagOfWords& bow, const DocVariational& var,
                            const ModelParams& model, const TopicLogWeights& logw,
                            double lambda) {
  const std::size_t k = model.num_topics();
  const auto& zeta = model.zeta;
  const auto elog = expected_log_theta(var.gamma);

  double zeta_sum = 0.0;
  double gamma_sum = 0.0;
  ElboBreakdown out;
  double ll = 0.0;
  double ent = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    zeta_sum += zeta[i];
    gamma_sum += var.gamma[i];
    ll += -log_gamma(zeta[i]) + (zeta[i] - 1.0) * elog[i];
    ent += log_gamma(var.gamma[i]) - (var.gamma[i] - 1.0) * elog[i];
  }
  ll += log_gamma(zeta_sum);
  ent -= log_gamma(gamma_sum);

  for (std::size_t u = 0; u < bow.types.size(); ++u) {
    const auto r = var.phi.row(u);
    const auto lw = logw.by_word.row(bow.types[u]);
    double word_ll = 0.0;
    double word_ent = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (r[i] <= 0.0) continue;
      word_ll += r[i] * (elog[i] + lw[i]);
      word_ent -= r[i] * std::log(r[i]);
    }
    ll += bow.counts[u] * word_ll;
    ent += bow.counts[u] * word_ent;
  }
  out.log_likelihood_terms = ll;
  out.entropy_of_q = ent;
  out.penalty_term = lambda == 0.0 ? 0.0 : lambda * expected_neg_entropy(var.gamma);
  out.total = out.log_likelihood_terms + out.entropy_of_q + out.penalty_term;
  return out;
}

namespace {

std::vector<BagOfWords> bags_of(const Corpus& corpus) {
  std::vector<BagOfWords> bows;
  bows.reserve(corpus.num_docs());
  for (const auto& d : corpus.documents) bows.push_back(bag_of_words(d));
  return bows;
}

}  // namespace

ElboBreakdown penalized_elbo(const Corpus& corpus, const ModelParams& model,
                             const std::vector<DocVariational>& per_doc,
                             const TrainConfig& config) {
  if (per_doc.size() != corpus.num_docs()) throw DataError("penalized_elbo: state count mismatch");
  const auto bows = bags_of(corpus);
  const TopicLogWeights logw(model);
  return sum_elbos(document_elbos(bows, per_doc, model, logw, config), config.reduction);
}

// ---------------------------------------------------------------------------

FitResult fit(const Corpus& corpus, const TrainConfig& config, const FitHooks& hooks) {
  config.validate();
  return fit_from(corpus, init_model(corpus, config, config.seed), config, hooks);
}

FitResult fit_from(const Corpus& corpus, ModelParams initial, const TrainConfig& config,
                   const FitHooks& hooks) {
  config.validate();
  corpus.validate(true);
  if (initial.num_topics() != config.num_topics || initial.vocab_size() != corpus.vocab_size()) {
    throw ConfigError("fit: initial model shape does not match config/corpus");
  }
  if (!config.doc_lambda.empty() && config.doc_lambda.size() != corpus.num_docs()) {
    throw ConfigError("fit: per-document lambda count does not match corpus");
  }

  FitResult result;
  result.model = std::move(initial);
  result.model.lambda = config.lambda;
  result.estep_totals.converged = true;

  const auto bows = bags_of(corpus);
  result.per_doc.reserve(bows.size());
  for (const auto& bow : bows) result.per_doc.push_back(init_doc_variational(bow, result.model.zeta));

  const StepObserver* observer = hooks.on_step ? &hooks.on_step : nullptr;
  auto run_estep = [&] {
    const TopicLogWeights logw(result.model);
    result.last_estep = observer != nullptr
                            ? estep_all_serial(bows, result.model, logw, config,
                                               result.per_doc, observer)
                            : estep_all(bows, result.model, logw, config, result.per_doc);
    result.estep_totals += result.last_estep;
    ++result.estep_passes;
  };

  double previous = 0.0;
  for (std::size_t iter = 1; iter <= config.em_max_iters; ++iter) {
    run_estep();
    if (hooks.after_estep) hooks.after_estep(iter, result.per_doc);

    result.model.eta = mstep(bows, result.per_doc, corpus.vocab_size(), config.reduction);
    if (hooks.after_mstep) hooks.after_mstep(iter, result.model);

    const TopicLogWeights logw(result.model);
    const ElboBreakdown elbo =
        sum_elbos(document_elbos(bows, result.per_doc, result.model, logw, config),
                  config.reduction);
    if (!std::isfinite(elbo.total)) throw NumericalError("fit: ELBO became non-finite");
    result.elbo_trace.push_back(elbo);
    result.iterations_run = iter;
    if (iter > 1 && std::abs(elbo.total - previous) < config.em_rel_tol * std::abs(previous)) {
      result.converged = true;
      break;
    }
    previous = elbo.total;
  }
  if (config.refresh_local) {
    for (std::size_t d = 0; d < bows.size(); ++d) {
      result.per_doc[d] = init_doc_variational(bows[d], result.model.zeta);
    }
    run_estep();
  }
  return result;
}

// ---------------------------------------------------------------------------

DocVariational infer_document(const Document& doc, const ModelParams& model, double lambda,
                              const TrainConfig& config) {
  Document known{doc.id, {}};
  known.tokens.reserve(doc.tokens.size());
  for (WordId w : doc.tokens) {
    if (w < model.vocab_size()) known.tokens.push_back(w);
  }
  if (known.tokens.empty()) {
    throw DataError("infer_document: document '" + doc.id + "' has no in-vocabulary tokens");
  }
  return estep_document(known, model, lambda, config).first;
}

HeldOutScore held_out_score(const Corpus& test, const ModelParams& model,
                            const TrainConfig& config) {
  if (test.documents.empty()) throw DataError("perplexity: empty test corpus");
  if (!config.doc_lambda.empty() && config.doc_lambda.size() != test.num_docs()) {
    throw ConfigError("perplexity: per-document lambda count does not match corpus");
  }
  const TopicLogWeights logw(model);
  const auto n = static_cast<std::ptrdiff_t>(test.num_docs());
  std::vector<double> bounds(test.num_docs(), 0.0);
  std::vector<double> lengths(test.num_docs(), 0.0);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    const auto idx = static_cast<std::size_t>(d);
    Document known{test.documents[idx].id, {}};
    for (WordId w : test.documents[idx].tokens) {
      if (w < model.vocab_size()) known.tokens.push_back(w);
    }
    if (known.tokens.empty()) continue;
    try {
      const BagOfWords bow = bag_of_words(known);
      DocVariational state = init_doc_variational(bow, model.zeta);
      estep_document(bow, model, logw, config.lambda_for(idx), config, state);
      bounds[idx] = document_elbo(bow, state, model, logw, 0.0).total;
      lengths[idx] = bow.total;
    } catch (...) {
#pragma omp critical(cdtm_held_out_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  HeldOutScore score;
  for (std::size_t d = 0; d < test.num_docs(); ++d) {
    if (lengths[d] == 0.0) {
      ++score.skipped_docs;
      continue;
    }
    ++score.scored_docs;
    score.bound += bounds[d];
    score.tokens += lengths[d];
  }
  if (score.scored_docs == 0) throw DataError("perplexity: no test document has known tokens");
  score.perplexity = std::exp(-score.bound / score.tokens);
  return score;
}

double perplexity(const Corpus& test, const ModelParams& model, const TrainConfig& config) {
  return held_out_score(test, model, config).perplexity;
}

}  // namespace cdtm
