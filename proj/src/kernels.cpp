#include "cdtm/kernels.hpp"

#include <exception>
#include <mutex>

#include <omp.h>

namespace cdtm {
namespace {

// Exceptions must not escape an OpenMP region; the first one is kept and
// rethrown after the region ends.
class FirstError {
 public:
  template <class F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

}  // namespace

EStepStats estep_all_serial(const std::vector<BagOfWords>& bows, const ModelParams& model,
                            const TopicLogWeights& logw, const TrainConfig& config,
                            std::vector<DocVariational>& states, const StepObserver* observer) {
  EStepStats total;
  total.converged = true;
  for (std::size_t d = 0; d < bows.size(); ++d) {
    total += estep_document(bows[d], model, logw, config.lambda_for(d), config, states[d],
                            observer, d);
  }
  return total;
}

EStepStats estep_all(const std::vector<BagOfWords>& bows, const ModelParams& model,
                     const TopicLogWeights& logw, const TrainConfig& config,
                     std::vector<DocVariational>& states) {
  std::vector<EStepStats> per_doc(bows.size());
  const auto n = static_cast<std::ptrdiff_t>(bows.size());
  FirstError errors;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    const auto idx = static_cast<std::size_t>(d);
    errors.run([&] {
      per_doc[idx] =
          estep_document(bows[idx], model, logw, config.lambda_for(idx), config, states[idx]);
    });
  }
  errors.rethrow();
  EStepStats total;
  total.converged = true;
  for (const auto& s : per_doc) total += s;
  return total;
}

Matrix topic_word_counts_serial(const std::vector<BagOfWords>& bows,
                                const std::vector<DocVariational>& states,
                                std::size_t num_topics, std::size_t vocab_size) {
  Matrix counts(num_topics, vocab_size, 0.0);
  for (std::size_t d = 0; d < bows.size(); ++d) {
    const auto& bow = bows[d];
    for (std::size_t u = 0; u < bow.types.size(); ++u) {
      const auto r = states[d].phi.row(u);
      for (std::size_t i = 0; i < num_topics; ++i) counts(i, bow.types[u]) += bow.counts[u] * r[i];
    }
  }
  return counts;
}

Matrix topic_word_counts(const std::vector<BagOfWords>& bows,
                         const std::vector<DocVariational>& states, std::size_t num_topics,
                         std::size_t vocab_size) {
  Matrix counts(num_topics, vocab_size, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(bows.size());
#pragma omp parallel
  {
    Matrix local(num_topics, vocab_size, 0.0);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t d = 0; d < n; ++d) {
      const auto idx = static_cast<std::size_t>(d);
      const auto& bow = bows[idx];
      for (std::size_t u = 0; u < bow.types.size(); ++u) {
        const auto r = states[idx].phi.row(u);
        for (std::size_t i = 0; i < num_topics; ++i) local(i, bow.types[u]) += bow.counts[u] * r[i];
      }
    }
#pragma omp critical(cdtm_topic_word_merge)
    {
      auto dst = counts.data();
      auto src = local.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  return counts;
}

std::vector<ElboBreakdown> document_elbos(const std::vector<BagOfWords>& bows,
                                          const std::vector<DocVariational>& states,
                                          const ModelParams& model, const TopicLogWeights& logw,
                                          const TrainConfig& config) {
  std::vector<ElboBreakdown> out(bows.size());
  const auto n = static_cast<std::ptrdiff_t>(bows.size());
  FirstError errors;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    const auto idx = static_cast<std::size_t>(d);
    errors.run([&] {
      out[idx] = document_elbo(bows[idx], states[idx], model, logw, config.lambda_for(idx));
    });
  }
  errors.rethrow();
  return out;
}

ElboBreakdown sum_elbos(const std::vector<ElboBreakdown>& parts, Reduction reduction) {
  ElboBreakdown total;
  if (reduction == Reduction::kDeterministic) {
    for (const auto& p : parts) total += p;
    return total;
  }
  double ll = 0.0, ent = 0.0, pen = 0.0, tot = 0.0;
  const auto n = static_cast<std::ptrdiff_t>(parts.size());
#pragma omp parallel for reduction(+ : ll, ent, pen, tot)
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    const auto& p = parts[static_cast<std::size_t>(d)];
    ll += p.log_likelihood_terms;
    ent += p.entropy_of_q;
    pen += p.penalty_term;
    tot += p.total;
  }
  total.log_likelihood_terms = ll;
  total.entropy_of_q = ent;
  total.penalty_term = pen;
  total.total = tot;
  return total;
}

}  // namespace cdtm
