#include "cdtm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <omp.h>

#include "cdtm/error.hpp"

namespace cdtm {

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",       "about",   "above",  "after",   "again",   "against", "all",     "am",
      "an",      "and",     "any",    "are",     "as",      "at",      "be",      "because",
      "been",    "before",  "being",  "below",   "between", "both",    "but",     "by",
      "can",     "could",   "did",    "do",      "does",    "doing",   "down",    "during",
      "each",    "few",     "for",    "from",    "further", "had",     "has",     "have",
      "having",  "he",      "her",    "here",    "hers",    "herself", "him",     "himself",
      "his",     "how",     "however","if",      "in",      "into",    "is",      "it",
      "its",     "itself",  "just",   "me",      "more",    "most",    "my",      "myself",
      "no",      "nor",     "not",    "now",     "of",      "off",     "on",      "once",
      "only",    "or",      "other",  "our",     "ours",    "ourselves","out",    "over",
      "own",     "same",    "she",    "should",  "so",      "some",    "such",    "than",
      "that",    "the",     "their",  "theirs",  "them",    "themselves","then",  "there",
      "these",   "they",    "this",   "those",   "through", "to",      "too",     "under",
      "until",   "up",      "very",   "was",     "we",      "were",    "what",    "when",
      "where",   "which",   "while",  "who",     "whom",    "why",     "will",    "with",
      "would",   "you",     "your",   "yours",   "yourself","yourselves","also",  "may",
      "us",      "et",      "al",     "thus",    "since",   "within",  "without", "via",
      "one",     "two",     "let",    "must",    "might",   "shall",   "upon",    "yet"};
  return words;
}

std::vector<std::string> tokenize(std::string_view raw_text, const TokenizerConfig& config) {
  const auto& stop = config.stopwords.empty() ? default_stopwords() : config.stopwords;
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= std::max<std::size_t>(config.min_length, 1) &&
        !(config.remove_stopwords && stop.contains(cur))) {
      out.push_back(cur);
    }
    cur.clear();
  };
  for (char ch : raw_text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(config.lowercase ? static_cast<char>(std::tolower(c)) : ch);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> doc_freq)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)) {
  if (doc_freq_.empty()) doc_freq_.assign(terms_.size(), 0);
  if (doc_freq_.size() != terms_.size()) {
    throw DataError("Vocabulary: document frequency count does not match term count");
  }
  index_.reserve(terms_.size());
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    if (terms_[j].empty()) throw DataError("Vocabulary: empty term");
    if (!index_.emplace(terms_[j], static_cast<WordId>(j)).second) {
      throw DataError("Vocabulary: duplicate term '" + terms_[j] + "'");
    }
  }
}

std::int64_t Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::vector<WordId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it != index_.end()) ids.push_back(it->second);
  }
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<WordId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (WordId id : ids) out.push_back(term(id));
  return out;
}

BagOfWords bag_of_words(const Document& doc) {
  std::vector<WordId> sorted = doc.tokens;
  std::sort(sorted.begin(), sorted.end());
  BagOfWords bow;
  for (std::size_t n = 0; n < sorted.size();) {
    std::size_t m = n;
    while (m < sorted.size() && sorted[m] == sorted[n]) ++m;
    bow.types.push_back(sorted[n]);
    bow.counts.push_back(static_cast<double>(m - n));
    n = m;
  }
  bow.total = static_cast<double>(sorted.size());
  return bow;
}

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.tokens.size();
  return n;
}

void Corpus::validate(bool require_nonempty) const {
  if (documents.empty()) throw DataError("corpus has no documents");
  const std::size_t v = vocabulary.size();
  for (const auto& d : documents) {
    if (require_nonempty && d.tokens.empty()) {
      throw DataError("document '" + d.id + "' has no tokens");
    }
    for (WordId w : d.tokens) {
      if (w >= v) throw DataError("document '" + d.id + "' references word id out of range");
    }
  }
}

BuildResult build_corpus(const std::vector<RawDocument>& docs, const CorpusConfig& config) {
  if (docs.empty()) throw DataError("build_corpus: no input documents");
  if (!(config.max_doc_fraction > 0.0) || config.max_doc_fraction > 1.0) {
    throw ConfigError("build_corpus: max_doc_fraction must be in (0, 1]");
  }
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(docs.size());
  std::map<std::string, std::uint32_t> df;
  for (const auto& d : docs) {
    tokenized.push_back(tokenize(d.text, config.tokenizer));
    std::set<std::string> seen(tokenized.back().begin(), tokenized.back().end());
    for (const auto& t : seen) ++df[t];
  }

  const double max_df = config.max_doc_fraction * static_cast<double>(docs.size());
  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  for (const auto& [term, f] : df) {  // std::map iterates in lexicographic order
    if (f >= config.min_doc_freq && static_cast<double>(f) <= max_df) {
      terms.push_back(term);
      freqs.push_back(f);
    }
  }

  BuildResult result;
  result.corpus.vocabulary = Vocabulary(std::move(terms), std::move(freqs));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto ids = result.corpus.vocabulary.encode(tokenized[i]);
    if (ids.empty()) {
      result.dropped.push_back(docs[i].id);
      continue;
    }
    result.corpus.documents.push_back({docs[i].id, std::move(ids)});
  }
  if (result.corpus.documents.empty()) {
    throw DataError("build_corpus: every document is empty after filtering");
  }
  return result;
}

std::pair<Corpus, Corpus> partition_corpus(const Corpus& corpus,
                                           const std::vector<std::size_t>& train_idx,
                                           const std::vector<std::size_t>& test_idx) {
  const std::size_t v = corpus.vocab_size();
  std::vector<std::uint32_t> df(v, 0);
  std::vector<char> seen(v, 0);
  for (std::size_t d : train_idx) {
    std::fill(seen.begin(), seen.end(), 0);
    for (WordId w : corpus.documents.at(d).tokens) {
      if (!seen[w]) {
        seen[w] = 1;
        ++df[w];
      }
    }
  }
  std::vector<std::int64_t> remap(v, -1);
  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  for (std::size_t w = 0; w < v; ++w) {
    if (df[w] > 0) {
      remap[w] = static_cast<std::int64_t>(terms.size());
      terms.push_back(corpus.vocabulary.term(static_cast<WordId>(w)));
      freqs.push_back(df[w]);
    }
  }
  Vocabulary vocab(std::move(terms), std::move(freqs));

  auto project = [&](const std::vector<std::size_t>& idx) {
    Corpus out;
    out.vocabulary = vocab;
    out.documents.reserve(idx.size());
    for (std::size_t d : idx) {
      const auto& src = corpus.documents.at(d);
      Document doc{src.id, {}};
      doc.tokens.reserve(src.tokens.size());
      for (WordId w : src.tokens) {
        if (remap[w] >= 0) doc.tokens.push_back(static_cast<WordId>(remap[w]));
      }
      out.documents.push_back(std::move(doc));
    }
    return out;
  };
  return {project(train_idx), project(test_idx)};
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                       std::uint64_t seed) {
  const std::size_t d = corpus.num_docs();
  if (d < 2) throw DataError("split_corpus: need at least two documents");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split_corpus: train fraction must lie in (0, 1)");
  }
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(d) * train_fraction));
  n_train = std::clamp<std::size_t>(n_train, 1, d - 1);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return partition_corpus(corpus, train, test);
}

// ---------------------------------------------------------------------------
// Window counts

WindowCounts::WindowCounts(std::size_t window_size, std::vector<WordId> targets)
    : window_size_(window_size) {
  if (window_size < 2) throw ConfigError("window size must be at least 2");
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.empty()) throw DataError("count_windows: empty target set");
  targets_ = std::move(targets);
  for (std::size_t i = 0; i < targets_.size(); ++i) local_.emplace(targets_[i], i);
  unigram_.assign(targets_.size(), 0);
}

std::uint64_t WindowCounts::key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

std::uint64_t WindowCounts::unigram(WordId w) const {
  auto it = local_.find(w);
  return it == local_.end() ? 0 : unigram_[it->second];
}

std::uint64_t WindowCounts::pair(WordId a, WordId b) const {
  auto ia = local_.find(a);
  auto ib = local_.find(b);
  if (ia == local_.end() || ib == local_.end()) return 0;
  if (ia->second == ib->second) return unigram_[ia->second];
  auto it = pairs_.find(key(ia->second, ib->second));
  return it == pairs_.end() ? 0 : it->second;
}

void WindowCounts::add_dense(std::uint64_t windows, const std::vector<std::uint64_t>& unigram,
                             const std::vector<std::uint64_t>& pair_upper) {
  const std::size_t t = targets_.size();
  total_windows_ += windows;
  for (std::size_t i = 0; i < t; ++i) unigram_[i] += unigram[i];
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = i + 1; j < t; ++j) {
      const std::uint64_t c = pair_upper[i * t + j];
      if (c != 0) pairs_[key(i, j)] += c;
    }
  }
}

namespace {

// Dense per-worker accumulator over tracked words.
struct WindowAccumulator {
  explicit WindowAccumulator(std::size_t t)
      : t(t), unigram(t, 0), pair_upper(t * t, 0), in_window(t, 0), slot(t, 0) {}

  void add_document(const std::vector<std::int64_t>& local_tokens, std::size_t window) {
    const std::size_t n = local_tokens.size();
    if (n == 0) return;
    const std::size_t w = std::min(window, n);
    const std::size_t starts = n >= window ? n - window + 1 : 1;
    windows += starts;

    present.clear();
    auto insert = [&](std::int64_t l) {
      if (l < 0) return;
      const auto u = static_cast<std::size_t>(l);
      if (in_window[u]++ == 0) {
        slot[u] = present.size();
        present.push_back(u);
      }
    };
    auto erase = [&](std::int64_t l) {
      if (l < 0) return;
      const auto u = static_cast<std::size_t>(l);
      if (--in_window[u] == 0) {
        const std::size_t s = slot[u];
        present[s] = present.back();
        slot[present[s]] = s;
        present.pop_back();
      }
    };

    for (std::size_t p = 0; p < w; ++p) insert(local_tokens[p]);
    for (std::size_t s = 0; s < starts; ++s) {
      if (s > 0) {
        erase(local_tokens[s - 1]);
        insert(local_tokens[s + w - 1]);
      }
      for (std::size_t a = 0; a < present.size(); ++a) {
        const std::size_t i = present[a];
        ++unigram[i];
        for (std::size_t b = a + 1; b < present.size(); ++b) {
          const std::size_t j = present[b];
          ++pair_upper[i < j ? i * t + j : j * t + i];
        }
      }
    }
    for (std::size_t p = starts - 1; p < n; ++p) erase(local_tokens[p]);
  }

  std::size_t t;
  std::uint64_t windows = 0;
  std::vector<std::uint64_t> unigram;
  std::vector<std::uint64_t> pair_upper;
  std::vector<std::uint32_t> in_window;
  std::vector<std::size_t> slot;
  std::vector<std::size_t> present;
};

std::vector<std::int64_t> to_local(const Document& doc, const WindowCounts& counts) {
  std::vector<std::int64_t> out(doc.tokens.size(), -1);
  for (std::size_t n = 0; n < doc.tokens.size(); ++n) {
    if (counts.tracks(doc.tokens[n])) {
      out[n] = static_cast<std::int64_t>(counts.local_index(doc.tokens[n]));
    }
  }
  return out;
}

}  // namespace

WindowCounts count_windows_serial(const Corpus& corpus, std::size_t window_size,
                                  const std::vector<WordId>& targets) {
  WindowCounts counts(window_size, targets);
  WindowAccumulator acc(counts.targets().size());
  for (const auto& doc : corpus.documents) acc.add_document(to_local(doc, counts), window_size);
  counts.add_dense(acc.windows, acc.unigram, acc.pair_upper);
  return counts;
}

WindowCounts count_windows(const Corpus& corpus, std::size_t window_size,
                           const std::vector<WordId>& targets) {
  WindowCounts counts(window_size, targets);
  const std::size_t t = counts.targets().size();
  const auto n_docs = static_cast<std::ptrdiff_t>(corpus.num_docs());
  std::vector<WindowAccumulator> partial;
#pragma omp parallel
  {
#pragma omp single
    partial.assign(static_cast<std::size_t>(omp_get_num_threads()), WindowAccumulator(t));
    auto& acc = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t d = 0; d < n_docs; ++d) {
      acc.add_document(to_local(corpus.documents[static_cast<std::size_t>(d)], counts),
                       window_size);
    }
  }
  for (const auto& acc : partial) counts.add_dense(acc.windows, acc.unigram, acc.pair_upper);
  return counts;
}

}  // namespace cdtm
