#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/model.hpp"

namespace cdtm {

// ---------------------------------------------------------------------------
// Concentration of document-topic distributions

/// Shannon entropy (natural log) with 0 log 0 = 0. Throws DataError if the
/// input is not on the simplex within 1e-9.
double entropy(std::span<const double> dist);

/// gamma / sum(gamma).
std::vector<double> normalize_gamma(std::span<const double> gamma);

struct EntropyStats {
  std::size_t num_topics = 0;
  std::vector<double> entropies;
  double mean = 0.0;
  double variance = 0.0;         // n - 1 denominator
  double skewness = 0.0;         // m3 / m2^1.5
  double excess_kurtosis = 0.0;  // m4 / m2^2 - 3
};

/// Normalizes each gamma and summarizes the entropies. Skewness and
/// kurtosis use central moments with a 1/n denominator and are reported as
/// 0 when the entropies have no spread.
EntropyStats entropy_stats(const std::vector<std::vector<double>>& per_doc_gamma);

struct Histogram {
  double bin_width = 0.05;
  double upper = 0.0;
  std::vector<std::size_t> counts;
};

/// Fixed-width bins over [0, log K]; the value log K falls in the last bin.
Histogram entropy_histogram(const std::vector<double>& entropies, std::size_t num_topics,
                            double bin_width = 0.05);

// ---------------------------------------------------------------------------
// C_V coherence

inline constexpr std::size_t kDefaultTopN = 20;
inline constexpr std::size_t kDefaultWindow = 110;
inline constexpr double kNpmiEpsilon = 1e-12;

struct TopicTopWords {
  std::size_t topic_id = 0;
  std::vector<WordId> words;  // descending eta weight
};

/// Top-n words of every topic; ties in weight go to the smaller word id.
std::vector<TopicTopWords> top_words(const ModelParams& model, std::size_t top_n);

/// Normalized PMI from boolean window counts, clamped to [-1, 1]. A pair
/// present in every window scores 1.
double npmi(WordId a, WordId b, const WindowCounts& counts);

/// Mean cosine similarity between each word's NPMI vector and their sum.
/// Zero-norm vectors contribute a similarity of 0.
double cv_score(const TopicTopWords& topic, const WindowCounts& counts);

struct CoherenceReport {
  std::vector<TopicTopWords> topics;
  std::vector<double> per_topic;
  double mean_cv = 0.0;
  std::size_t window_size = kDefaultWindow;
  std::size_t top_n = kDefaultTopN;
};

CoherenceReport coherence_report(const ModelParams& model, const Corpus& reference,
                                 std::size_t top_n = kDefaultTopN,
                                 std::size_t window_size = kDefaultWindow);

// ---------------------------------------------------------------------------
// Cross-validated selection of K and lambda

enum class CoherenceReference {
  kValidationFold,
  kTrainingFolds,
};

struct GridConfig {
  std::vector<std::size_t> ks;
  std::vector<double> lambdas;
  std::size_t folds = 5;
  TrainConfig train;
  std::size_t top_n = kDefaultTopN;
  std::size_t window_size = kDefaultWindow;
  CoherenceReference reference = CoherenceReference::kValidationFold;
  std::uint64_t fold_seed = 1;
};

struct GridRow {
  std::size_t k = 0;
  double lambda = 0.0;
  std::size_t fold = 0;
  std::string metric;  // "perplexity" or "cv"
  double value = 0.0;
};

struct GridSelection {
  std::size_t best_k = 0;
  double best_lambda = 0.0;
  std::vector<GridRow> table;
};

/// Fold ids for D documents: a seeded permutation cut into `folds`
/// contiguous, near-equal blocks.
std::vector<std::size_t> assign_folds(std::size_t num_docs, std::size_t folds, std::uint64_t seed);

/// Stage 1 picks K by mean held-out perplexity at lambda = 0 (lower wins,
/// ties to the smaller K). Stage 2 picks lambda at that K by mean C_V
/// (higher wins, ties to the smaller lambda).
GridSelection grid_select(const Corpus& corpus, const GridConfig& config);

}  // namespace cdtm
