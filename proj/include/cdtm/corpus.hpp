#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cdtm {

using WordId = std::uint32_t;

struct TokenizerConfig {
  bool lowercase = true;
  bool remove_stopwords = true;
  std::size_t min_length = 2;
  /// Empty means the built-in English list.
  std::unordered_set<std::string> stopwords;

  bool operator==(const TokenizerConfig&) const = default;
};

/// Built-in English stopword list.
const std::unordered_set<std::string>& default_stopwords();

/// Lowercases, treats every non-alphanumeric byte as a separator, then
/// applies the stopword and minimum-length filters.
std::vector<std::string> tokenize(std::string_view raw_text, const TokenizerConfig& config = {});

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Terms must be unique and non-empty. `doc_freq` may be empty (all zero).
  explicit Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> doc_freq = {});

  std::size_t size() const { return terms_.size(); }
  const std::string& term(WordId id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const { return terms_; }
  std::uint32_t document_frequency(WordId id) const { return doc_freq_.at(id); }
  const std::vector<std::uint32_t>& document_frequencies() const { return doc_freq_; }

  /// Word id of `term`, or -1 when absent.
  std::int64_t find(std::string_view term) const;
  bool contains(std::string_view term) const { return find(term) >= 0; }

  /// Encodes tokens, dropping those not in the vocabulary.
  std::vector<WordId> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<WordId>& ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::uint32_t> doc_freq_;
  std::unordered_map<std::string, WordId> index_;
};

struct Document {
  std::string id;
  std::vector<WordId> tokens;

  std::size_t length() const { return tokens.size(); }
};

/// Distinct word types of a document with their multiplicities, in ascending id order.
struct BagOfWords {
  std::vector<WordId> types;
  std::vector<double> counts;
  double total = 0.0;
};

BagOfWords bag_of_words(const Document& doc);

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;

  std::size_t num_docs() const { return documents.size(); }
  std::size_t vocab_size() const { return vocabulary.size(); }
  std::size_t num_tokens() const;

  /// Throws DataError when a token id is out of range, when there are no
  /// documents, or (if `require_nonempty`) when a document has no tokens.
  void validate(bool require_nonempty = true) const;
};

struct RawDocument {
  std::string id;
  std::string text;
};

struct CorpusConfig {
  TokenizerConfig tokenizer;
  std::uint32_t min_doc_freq = 5;
  /// Terms occurring in more than this fraction of documents are removed.
  double max_doc_fraction = 0.5;

  bool operator==(const CorpusConfig&) const = default;
};

struct BuildResult {
  Corpus corpus;
  /// Ids of documents dropped because nothing survived filtering.
  std::vector<std::string> dropped;
};

/// Tokenizes, filters by document frequency and encodes. Terms are ordered
/// lexicographically. Throws DataError when every document ends up empty.
BuildResult build_corpus(const std::vector<RawDocument>& docs, const CorpusConfig& config = {});

/// Restricts `corpus` to the given document indices for training and testing.
/// The vocabulary is reduced to terms occurring in the training documents
/// (document frequencies recomputed on them); test tokens outside it are
/// dropped, so test documents may end up empty.
std::pair<Corpus, Corpus> partition_corpus(const Corpus& corpus,
                                           const std::vector<std::size_t>& train_idx,
                                           const std::vector<std::size_t>& test_idx);

/// Random disjoint split; train size is floor(D * fraction) clamped to
/// [1, D-1]. Deterministic for a fixed seed.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                       std::uint64_t seed);

/// Boolean sliding-window occurrence statistics for a set of tracked words.
class WindowCounts {
 public:
  WindowCounts(std::size_t window_size, std::vector<WordId> targets);

  std::size_t window_size() const { return window_size_; }
  std::uint64_t total_windows() const { return total_windows_; }
  const std::vector<WordId>& targets() const { return targets_; }
  bool tracks(WordId w) const { return local_.contains(w); }

  /// Number of windows containing `w`; 0 for untracked words.
  std::uint64_t unigram(WordId w) const;
  /// Number of windows containing both words; pair(w, w) == unigram(w).
  std::uint64_t pair(WordId a, WordId b) const;

  /// Number of stored (non-zero, off-diagonal) pairs.
  std::size_t stored_pairs() const { return pairs_.size(); }

  /// Used by the counting kernels. Indices are positions in targets().
  void add_dense(std::uint64_t windows, const std::vector<std::uint64_t>& unigram,
                 const std::vector<std::uint64_t>& pair_upper);
  std::size_t local_index(WordId w) const { return local_.at(w); }

 private:
  static std::uint64_t key(std::size_t a, std::size_t b);

  std::size_t window_size_;
  std::vector<WordId> targets_;
  std::unordered_map<WordId, std::size_t> local_;
  std::uint64_t total_windows_ = 0;
  std::vector<std::uint64_t> unigram_;
  std::unordered_map<std::uint64_t, std::uint64_t> pairs_;
};

/// Reference single-threaded window counter. Windows advance one token at a
/// time; a document shorter than the window counts as a single window and an
/// empty one as none.
WindowCounts count_windows_serial(const Corpus& corpus, std::size_t window_size,
                                  const std::vector<WordId>& targets);

/// OpenMP version: documents are sharded across threads and counts merged by
/// addition. Integer counts, so the result equals the serial one exactly.
WindowCounts count_windows(const Corpus& corpus, std::size_t window_size,
                           const std::vector<WordId>& targets);

}  // namespace cdtm
