#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/matrix.hpp"
#include "cdtm/model.hpp"

namespace cdtm {

// ---------------------------------------------------------------------------
// The gamma block of the penalized ELBO
//
// With a_i = zeta_i + sum_n phi_ni and S = sum_l gamma_l:
//
//   L[gamma] = sum_i (psi(gamma_i) - psi(S)) (a_i - gamma_i)
//              - lnGamma(S) + sum_i lnGamma(gamma_i)
//              + lambda (sum_l gamma_l psi(gamma_l) / S - psi(S) + (K-1)/S)
//
// The lambda block is E_q[-lambda H(theta)].

double elbo_gamma_part(std::span<const double> gamma, std::span<const double> zeta,
                       std::span<const double> phi_colsums, double lambda);

/// dL[gamma]/dgamma_i.
double grad_gamma(std::span<const double> gamma, std::span<const double> zeta,
                  std::span<const double> phi_colsums, double lambda, std::size_t i);

/// d^2 L[gamma]/dgamma_i^2.
double hess_gamma_diag(std::span<const double> gamma, std::span<const double> zeta,
                       std::span<const double> phi_colsums, double lambda, std::size_t i);

/// L[gamma] restricted to coordinate i with the others frozen. Values are
/// offset by a constant that does not depend on x, so only differences and
/// derivatives are meaningful. Every evaluation is O(1).
class CoordinateObjective {
 public:
  CoordinateObjective(std::span<const double> gamma, std::span<const double> zeta,
                      std::span<const double> phi_colsums, double lambda, std::size_t i);

  double value(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

 private:
  double target_;      // a_i
  double total_a_;     // sum_l a_l
  double rest_sum_;    // sum_{l != i} gamma_l
  double rest_gpsi_;   // sum_{l != i} gamma_l psi(gamma_l)
  double lambda_;
  double k_minus_1_;
};

/// Full Hessian of L[gamma]. It has the form diag(d) + c 11' + u 1' + 1 u',
/// which the block Newton step exploits; this dense version is for checking.
Matrix hess_gamma(std::span<const double> gamma, std::span<const double> zeta,
                  std::span<const double> phi_colsums, double lambda);

struct NewtonStep {
  double value = 0.0;   // updated gamma_i
  double delta = 0.0;   // Newton (or fallback) direction
  double alpha = 0.0;   // accepted step size; 0 when no step was taken
  std::size_t backtracks = 0;
  bool converged = false;  // |delta| < newton_tol, nothing changed
  bool stalled = false;    // line search exhausted, nothing changed
  bool fallback = false;   // curvature unusable, gradient direction used
  double objective_before = 0.0;  // CoordinateObjective values
  double objective_after = 0.0;
};

/// One damped Newton update of gamma_i. The direction is -L'/L'' when
/// L'' < -1e-12, otherwise sign(L') min(|L'|, 1). The step size starts at 1
/// and shrinks by rho until gamma_i + alpha delta >= gamma_floor and
/// -L(gamma_i + alpha delta) <= -L(gamma_i) - delta_armijo alpha L' delta.
NewtonStep newton_coordinate_step(std::span<const double> gamma, std::size_t i,
                                  std::span<const double> zeta,
                                  std::span<const double> phi_colsums, double lambda,
                                  const TrainConfig& config);

struct BlockStep {
  std::vector<double> value;  // updated gamma
  std::vector<double> delta;  // Newton direction
  double alpha = 0.0;
  std::size_t backtracks = 0;
  bool converged = false;   // max |delta_i| < newton_tol; the step is still
                            // applied (alpha = 1) if it passes the line search
  bool stalled = false;     // line search exhausted, nothing changed
  bool damped = false;      // Hessian shifted to get an ascent direction
  bool unusable = false;    // no ascent direction found (zero gradient)
  double objective_before = 0.0;  // elbo_gamma_part values
  double objective_after = 0.0;
};

/// Damped Newton update of the whole gamma vector, solved in O(K) through the
/// diagonal plus rank-two structure of the Hessian. When the Newton
/// direction does not ascend, H - mu I is used instead with mu raised by
/// decades. Uses the same Armijo rule and floor as the coordinate step.
BlockStep newton_block_step(std::span<const double> gamma, std::span<const double> zeta,
                            std::span<const double> phi_colsums, double lambda,
                            const TrainConfig& config);

// ---------------------------------------------------------------------------
// E-step

enum class StepKind { kCoordinate, kBlock };

/// Emitted for every accepted (gamma-changing) Newton step.
struct StepEvent {
  std::size_t doc = 0;
  StepKind kind = StepKind::kCoordinate;
  std::size_t coordinate = 0;  // meaningful for kCoordinate
  std::span<const double> gamma_before;
  std::span<const double> gamma_after;
  std::span<const double> zeta;
  std::span<const double> phi_colsums;
  double lambda = 0.0;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct EStepStats {
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t newton_steps = 0;
  std::size_t block_steps = 0;
  std::size_t stalls = 0;
  std::size_t fallbacks = 0;

  EStepStats& operator+=(const EStepStats& o);
};

/// Topic log-weights stored word-major (V x K) for the phi update.
struct TopicLogWeights {
  explicit TopicLogWeights(const ModelParams& model);
  Matrix by_word;
};

/// phi_ni proportional to eta_{i,w_n} exp(E_q[log theta_i]), one row per word type.
Matrix update_phi(const BagOfWords& bow, std::span<const double> gamma, const ModelParams& model);

/// Runs the document E-step starting from `state` (warm start). Alternates a
/// full phi update with a gamma solve until gamma moves by less than
/// newton_tol and the mean absolute phi change is below estep_phi_tol, or
/// estep_max_iters is reached. The gamma solve is one ascending sweep of
/// per-coordinate Newton solves, or with config.block_newton repeated block
/// steps (a coordinate sweep stands in whenever a block step is unusable).
EStepStats estep_document(const BagOfWords& bow, const ModelParams& model,
                          const TopicLogWeights& logw, double lambda,
                          const TrainConfig& config, DocVariational& state,
                          const StepObserver* observer = nullptr, std::size_t doc_index = 0);

/// Cold-start E-step for one document.
std::pair<DocVariational, EStepStats> estep_document(const Document& doc,
                                                     const ModelParams& model, double lambda,
                                                     const TrainConfig& config);

// ---------------------------------------------------------------------------
// M-step and objective

/// eta_ij proportional to sum_d sum_n phi_dni [w_dn = j], smoothed then row-normalized.
Matrix mstep(const std::vector<BagOfWords>& bows, const std::vector<DocVariational>& per_doc,
             std::size_t vocab_size, Reduction reduction = Reduction::kDeterministic);

struct ElboBreakdown {
  double log_likelihood_terms = 0.0;  // E_q[ln p(theta, Z, W | zeta, eta)]
  double entropy_of_q = 0.0;          // -E_q[ln q]
  double penalty_term = 0.0;          // E_q[-lambda H(theta)]
  double total = 0.0;

  ElboBreakdown& operator+=(const ElboBreakdown& o);
};

ElboBreakdown document_elbo(const BagOfWords& bow, const DocVariational& var,
                            const ModelParams& model, const TopicLogWeights& logw,
                            double lambda);

/// Sum of document_elbo over the corpus. `lambda_for(d)` gives each weight.
ElboBreakdown penalized_elbo(const Corpus& corpus, const ModelParams& model,
                             const std::vector<DocVariational>& per_doc,
                             const TrainConfig& config);

// ---------------------------------------------------------------------------
// Training

struct FitHooks {
  /// Called for every accepted Newton step. Forces the serial E-step kernel.
  StepObserver on_step;
  /// Called after each E-step pass with the per-document state.
  std::function<void(std::size_t iteration, const std::vector<DocVariational>&)> after_estep;
  /// Called after each M-step with the new topics.
  std::function<void(std::size_t iteration, const ModelParams&)> after_mstep;
};

struct FitResult {
  ModelParams model;
  std::vector<DocVariational> per_doc;
  std::vector<ElboBreakdown> elbo_trace;
  std::size_t iterations_run = 0;
  std::size_t estep_passes = 0;
  bool converged = false;
  EStepStats estep_totals;
  /// The last E-step pass alone (the refresh pass when refresh_local is set).
  EStepStats last_estep;
};

/// Penalized variational EM. Each iteration runs an E-step over all
/// documents (warm-started from the previous iteration), an M-step, and
/// records the penalized ELBO. Stops when the relative ELBO change drops
/// below em_rel_tol or after em_max_iters iterations.
FitResult fit(const Corpus& corpus, const TrainConfig& config, const FitHooks& hooks = {});

/// Same, starting from the given topics instead of a random init.
FitResult fit_from(const Corpus& corpus, ModelParams initial, const TrainConfig& config,
                   const FitHooks& hooks = {});

// ---------------------------------------------------------------------------
// Held-out scoring

/// E-step with frozen topics; word ids >= V are skipped. Throws DataError if
/// nothing is left.
DocVariational infer_document(const Document& doc, const ModelParams& model, double lambda,
                              const TrainConfig& config);

struct HeldOutScore {
  double perplexity = 0.0;
  double bound = 0.0;          // sum of unpenalized per-document bounds
  double tokens = 0.0;
  std::size_t scored_docs = 0;
  std::size_t skipped_docs = 0;
};

/// exp(-sum_d bound_d / sum_d N_d) with bound_d the unpenalized ELBO after
/// held-out inference (inference itself uses config.lambda_for(d)).
/// Empty documents are skipped; throws DataError if none can be scored.
HeldOutScore held_out_score(const Corpus& test, const ModelParams& model,
                            const TrainConfig& config);

double perplexity(const Corpus& test, const ModelParams& model, const TrainConfig& config);

}  // namespace cdtm
