#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/matrix.hpp"

namespace cdtm {

struct SyntheticSpec {
  std::size_t num_docs = 50;
  std::size_t vocab_size = 100;
  std::size_t num_topics = 5;
  std::size_t min_length = 50;
  std::size_t max_length = 200;
  /// Each document mixes between 1 and this many topics.
  std::size_t max_topics_per_doc = 2;
  /// Share of each topic's mass on its own block of V/K words.
  double topic_purity = 0.9;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  Corpus corpus;
  Matrix topics;                            // K x V ground truth
  std::vector<std::vector<double>> theta;   // per-document mixing weights
};

/// Words are named "w000", "w001", ...; topic k owns the k-th contiguous block.
SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

/// Documents rendered back to whitespace-separated text (for CLI tests).
std::vector<std::string> to_text_lines(const Corpus& corpus);

}  // namespace cdtm
