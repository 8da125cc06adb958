#pragma once

// Corpus-wide data-parallel kernels. Each has a serial reference used by the
// tests and benchmarks; the OpenMP versions must agree with it (exactly for
// the E-step, up to summation order for the reductions).

#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/inference.hpp"
#include "cdtm/matrix.hpp"
#include "cdtm/model.hpp"

namespace cdtm {

EStepStats estep_all_serial(const std::vector<BagOfWords>& bows, const ModelParams& model,
                            const TopicLogWeights& logw, const TrainConfig& config,
                            std::vector<DocVariational>& states,
                            const StepObserver* observer = nullptr);

/// Documents are independent, so the result is identical to the serial
/// kernel for any thread count.
EStepStats estep_all(const std::vector<BagOfWords>& bows, const ModelParams& model,
                     const TopicLogWeights& logw, const TrainConfig& config,
                     std::vector<DocVariational>& states);

/// Expected topic-word counts sum_d sum_n phi_dni [w_dn = j], K x V, in document order.
Matrix topic_word_counts_serial(const std::vector<BagOfWords>& bows,
                                const std::vector<DocVariational>& states,
                                std::size_t num_topics, std::size_t vocab_size);

/// Per-thread K x V accumulators merged by addition.
Matrix topic_word_counts(const std::vector<BagOfWords>& bows,
                         const std::vector<DocVariational>& states, std::size_t num_topics,
                         std::size_t vocab_size);

/// Per-document ELBO terms, computed in parallel; summing them in index
/// order gives a thread-count independent total.
std::vector<ElboBreakdown> document_elbos(const std::vector<BagOfWords>& bows,
                                          const std::vector<DocVariational>& states,
                                          const ModelParams& model, const TopicLogWeights& logw,
                                          const TrainConfig& config);

ElboBreakdown sum_elbos(const std::vector<ElboBreakdown>& parts, Reduction reduction);

}  // namespace cdtm
