#include "cdtm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cdtm/error.hpp"
#include "cdtm/inference.hpp"

namespace cdtm {

double entropy(std::span<const double> dist) {
  if (dist.empty()) throw DataError("entropy: empty distribution");
  double sum = 0.0;
  double h = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("entropy: negative or non-finite entry");
    sum += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("entropy: distribution does not sum to 1");
  return std::max(h, 0.0);
}

std::vector<double> normalize_gamma(std::span<const double> gamma) {
  double sum = 0.0;
  for (double g : gamma) sum += g;
  if (!(sum > 0.0)) throw DataError("normalize_gamma: non-positive total");
  std::vector<double> out(gamma.begin(), gamma.end());
  for (double& v : out) v /= sum;
  return out;
}

EntropyStats entropy_stats(const std::vector<std::vector<double>>& per_doc_gamma) {
  if (per_doc_gamma.empty()) throw DataError("entropy_stats: no documents");
  EntropyStats st;
  st.num_topics = per_doc_gamma.front().size();
  const double cap = std::log(static_cast<double>(st.num_topics));
  st.entropies.reserve(per_doc_gamma.size());
  for (const auto& g : per_doc_gamma) {
    if (g.size() != st.num_topics) throw DataError("entropy_stats: inconsistent K");
    st.entropies.push_back(std::min(entropy(normalize_gamma(g)), cap));
  }
  const auto n = static_cast<double>(st.entropies.size());
  st.mean = std::accumulate(st.entropies.begin(), st.entropies.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double h : st.entropies) {
    const double c = h - st.mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  st.variance = n > 1 ? m2 / (n - 1) : 0.0;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    st.skewness = m3 / std::pow(m2, 1.5);
    st.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return st;
}

Histogram entropy_histogram(const std::vector<double>& entropies, std::size_t num_topics,
                            double bin_width) {
  if (num_topics < 2) throw DataError("entropy_histogram: need K >= 2");
  if (!(bin_width > 0.0)) throw ConfigError("entropy_histogram: bin width must be positive");
  Histogram hist;
  hist.bin_width = bin_width;
  hist.upper = std::log(static_cast<double>(num_topics));
  const auto bins = static_cast<std::size_t>(std::ceil(hist.upper / bin_width));
  hist.counts.assign(std::max<std::size_t>(bins, 1), 0);
  for (double h : entropies) {
    auto b = static_cast<std::size_t>(std::max(h, 0.0) / bin_width);
    ++hist.counts[std::min(b, hist.counts.size() - 1)];
  }
  return hist;
}

// ---------------------------------------------------------------------------

std::vector<TopicTopWords> top_words(const ModelParams& model, std::size_t top_n) {
  if (top_n < 2) throw ConfigError("top_n must be at least 2");
  if (top_n > model.vocab_size()) throw ConfigError("top_n exceeds vocabulary size");
  std::vector<TopicTopWords> out;
  out.reserve(model.num_topics());
  for (std::size_t i = 0; i < model.num_topics(); ++i) {
    const auto row = model.eta.row(i);
    std::vector<WordId> ids(model.vocab_size());
    std::iota(ids.begin(), ids.end(), WordId{0});
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(top_n), ids.end(),
                      [&](WordId a, WordId b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
    ids.resize(top_n);
    out.push_back({i, std::move(ids)});
  }
  return out;
}

double npmi(WordId a, WordId b, const WindowCounts& counts) {
  const auto total = static_cast<double>(counts.total_windows());
  if (total == 0.0) throw DataError("npmi: no windows counted");
  if (!counts.tracks(a) || !counts.tracks(b)) throw DataError("npmi: word not tracked");
  const std::uint64_t joint_count = counts.pair(a, b);
  if (joint_count == counts.total_windows()) return 1.0;
  const double pj = static_cast<double>(joint_count) / total;
  const double pa = static_cast<double>(counts.unigram(a)) / total;
  const double pb = static_cast<double>(counts.unigram(b)) / total;
  const double log_joint = std::log(pj + kNpmiEpsilon);
  const double value = (log_joint - std::log(pa * pb + kNpmiEpsilon)) / -log_joint;
  return std::clamp(value, -1.0, 1.0);
}

double cv_score(const TopicTopWords& topic, const WindowCounts& counts) {
  const std::size_t n = topic.words.size();
  if (n < 2) throw DataError("cv_score: need at least two words");
  std::vector<double> vectors(n * n);
  std::vector<double> sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = npmi(topic.words[i], topic.words[j], counts);
      vectors[i * n + j] = v;
      sum[j] += v;
    }
  }
  double sum_norm = 0.0;
  for (double v : sum) sum_norm += v * v;
  sum_norm = std::sqrt(sum_norm);

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dot += vectors[i * n + j] * sum[j];
      norm += vectors[i * n + j] * vectors[i * n + j];
    }
    norm = std::sqrt(norm);
    if (norm > 0.0 && sum_norm > 0.0) total += std::clamp(dot / (norm * sum_norm), -1.0, 1.0);
  }
  return total / static_cast<double>(n);
}

CoherenceReport coherence_report(const ModelParams& model, const Corpus& reference,
                                 std::size_t top_n, std::size_t window_size) {
  if (reference.documents.empty()) throw DataError("coherence_report: empty reference corpus");
  CoherenceReport report;
  report.top_n = top_n;
  report.window_size = window_size;
  report.topics = top_words(model, top_n);
  std::vector<WordId> targets;
  for (const auto& t : report.topics) targets.insert(targets.end(), t.words.begin(), t.words.end());
  const WindowCounts counts = count_windows(reference, window_size, targets);
  if (counts.total_windows() == 0) throw DataError("coherence_report: reference corpus has no tokens");

  report.per_topic.resize(report.topics.size());
  for (std::size_t i = 0; i < report.topics.size(); ++i) {
    report.per_topic[i] = cv_score(report.topics[i], counts);
  }
  report.mean_cv = std::accumulate(report.per_topic.begin(), report.per_topic.end(), 0.0) /
                   static_cast<double>(report.per_topic.size());
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> assign_folds(std::size_t num_docs, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
  if (num_docs < folds) throw DataError("cross-validation: fewer documents than folds");
  std::vector<std::size_t> order(num_docs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold_of(num_docs);
  for (std::size_t p = 0; p < num_docs; ++p) fold_of[order[p]] = p * folds / num_docs;
  return fold_of;
}

namespace {

struct FoldData {
  Corpus train;
  Corpus held_out;
};

std::vector<FoldData> make_folds(const Corpus& corpus, std::size_t folds, std::uint64_t seed) {
  const auto fold_of = assign_folds(corpus.num_docs(), folds, seed);
  std::vector<FoldData> out;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t d = 0; d < fold_of.size(); ++d) (fold_of[d] == f ? test : train).push_back(d);
    auto [tr, te] = partition_corpus(corpus, train, test);
    std::erase_if(te.documents, [](const Document& d) { return d.tokens.empty(); });
    if (te.documents.empty()) throw DataError("cross-validation: held-out fold has no known tokens");
    out.push_back({std::move(tr), std::move(te)});
  }
  return out;
}

double mean_of(const std::vector<GridRow>& rows, std::size_t k, double lambda,
               const std::string& metric) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.k == k && r.lambda == lambda && r.metric == metric) {
      sum += r.value;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

GridSelection grid_select(const Corpus& corpus, const GridConfig& config) {
  if (config.ks.empty() || config.lambdas.empty()) throw ConfigError("grid_select: empty grid");
  for (double l : config.lambdas) {
    if (!(l >= 0.0)) throw ConfigError("grid_select: lambda candidates must be >= 0");
  }
  corpus.validate(true);
  const auto folds = make_folds(corpus, config.folds, config.fold_seed);

  GridSelection sel;
  for (std::size_t k : config.ks) {
    TrainConfig tc = config.train;
    tc.num_topics = k;
    tc.lambda = 0.0;
    tc.doc_lambda.clear();
    tc.zeta.clear();
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const FitResult fitted = fit(folds[f].train, tc);
      sel.table.push_back({k, 0.0, f, "perplexity", perplexity(folds[f].held_out, fitted.model, tc)});
    }
  }
  double best = 0.0;
  for (std::size_t idx = 0; idx < config.ks.size(); ++idx) {
    const std::size_t k = config.ks[idx];
    const double m = mean_of(sel.table, k, 0.0, "perplexity");
    if (idx == 0 || m < best || (m == best && k < sel.best_k)) {
      best = m;
      sel.best_k = k;
    }
  }

  for (double lambda : config.lambdas) {
    TrainConfig tc = config.train;
    tc.num_topics = sel.best_k;
    tc.lambda = lambda;
    tc.doc_lambda.clear();
    tc.zeta.clear();
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const FitResult fitted = fit(folds[f].train, tc);
      const Corpus& ref = config.reference == CoherenceReference::kValidationFold
                              ? folds[f].held_out
                              : folds[f].train;
      const auto report = coherence_report(fitted.model, ref, config.top_n, config.window_size);
      sel.table.push_back({sel.best_k, lambda, f, "cv", report.mean_cv});
    }
  }
  for (std::size_t idx = 0; idx < config.lambdas.size(); ++idx) {
    const double lambda = config.lambdas[idx];
    const double m = mean_of(sel.table, sel.best_k, lambda, "cv");
    if (idx == 0 || m > best || (m == best && lambda < sel.best_lambda)) {
      best = m;
      sel.best_lambda = lambda;
    }
  }
  return sel;
}

}  // namespace cdtm
