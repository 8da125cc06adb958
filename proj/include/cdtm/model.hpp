#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/matrix.hpp"

namespace cdtm {

/// Additive smoothing applied to topic-word weights before row normalization.
inline constexpr double kEtaFloor = 1e-12;

/// Global parameters: K topic-word distributions and the Dirichlet prior.
struct ModelParams {
  Matrix eta;                 // K x V, rows on the simplex
  std::vector<double> zeta;   // K, all > 0
  /// Penalty weight the model was trained with (0 for plain LDA).
  double lambda = 0.0;

  std::size_t num_topics() const { return eta.rows(); }
  std::size_t vocab_size() const { return eta.cols(); }

  /// Throws DataError if shapes disagree, a row is off the simplex by more
  /// than 1e-9, or a prior entry is not positive.
  void validate() const;
};

/// Per-document variational state. `phi` has one row per distinct word type
/// of the document (see BagOfWords); repeated tokens of the same word share
/// the same row, so this is the token-level matrix with duplicates collapsed.
struct DocVariational {
  std::vector<double> gamma;  // K
  Matrix phi;                 // types x K
};

/// Expands the per-type phi back to one row per token position.
Matrix expand_phi(const Document& doc, const BagOfWords& bow, const DocVariational& var);

/// How sufficient statistics and ELBO sums are reduced across documents.
enum class Reduction {
  /// Serial reduction in document order; bitwise reproducible for any thread count.
  kDeterministic,
  /// Per-thread partial sums merged in arbitrary order.
  kFast,
};

struct TrainConfig {
  std::size_t num_topics = 10;
  /// Homogeneous penalty weight.
  double lambda = 0.0;
  /// Optional per-document weights; overrides `lambda` when non-empty.
  std::vector<double> doc_lambda;
  /// Symmetric 1/K when empty.
  std::vector<double> zeta;

  std::size_t em_max_iters = 200;
  double em_rel_tol = 1e-6;
  std::size_t estep_max_iters = 100;
  /// Mean absolute phi change required for E-step convergence.
  double estep_phi_tol = 1e-5;
  std::size_t newton_max_iters = 50;
  /// Newton stopping threshold on |delta gamma_i|.
  double newton_tol = 1e-5;
  /// Armijo sufficient-increase constant, in (0, 0.5).
  double armijo_delta = 0.01;
  /// Backtracking contraction factor, in (0, 1).
  double backtrack_rho = 0.5;
  std::size_t max_backtracks = 60;
  /// Solve the gamma block with full Newton steps instead of a single
  /// coordinate sweep per phi update. Off reproduces plain coordinate ascent.
  bool block_newton = true;
  double gamma_floor = 1e-8;

  std::uint64_t seed = 1;
  Reduction reduction = Reduction::kDeterministic;
  /// After the last M-step, rerun the E-step from the standard initialization
  /// so the returned per-document state matches the returned topics and is
  /// exactly what held-out inference gives for the same documents.
  bool refresh_local = true;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  double lambda_for(std::size_t doc) const {
    return doc_lambda.empty() ? lambda : doc_lambda[doc];
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Random start: each topic row is the corpus word distribution (add-one
/// smoothed) multiplied by a per-entry factor drawn from [0.5, 1.5), then
/// normalized. Throws ConfigError when V < K or K < 2.
ModelParams init_model(const Corpus& corpus, const TrainConfig& config, std::uint64_t seed);

/// gamma_i = zeta_i + N/K, phi uniform.
DocVariational init_doc_variational(const BagOfWords& bow, std::span<const double> zeta);

/// Resolves the prior for `config`: the override if given, else 1/K.
std::vector<double> resolve_zeta(const TrainConfig& config);

/// Smooths by kEtaFloor and normalizes each row in place.
void normalize_topic_rows(Matrix& eta);

}  // namespace cdtm
