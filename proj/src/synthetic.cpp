#include "cdtm/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "cdtm/error.hpp"

namespace cdtm {

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.num_topics < 1 || spec.vocab_size < spec.num_topics || spec.num_docs == 0 ||
      spec.min_length == 0 || spec.max_length < spec.min_length || spec.max_topics_per_doc == 0) {
    throw ConfigError("make_synthetic_corpus: inconsistent spec");
  }
  const std::size_t k = spec.num_topics;
  const std::size_t v = spec.vocab_size;
  std::mt19937_64 rng(spec.seed);

  SyntheticCorpus out;
  out.topics = Matrix(k, v);
  const std::size_t block = v / k;
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t lo = t * block;
    const std::size_t hi = t + 1 == k ? v : lo + block;
    for (std::size_t j = 0; j < v; ++j) {
      double w = (1.0 - spec.topic_purity) / static_cast<double>(v);
      if (j >= lo && j < hi) w += spec.topic_purity / static_cast<double>(hi - lo);
      out.topics(t, j) = w;
    }
  }

  std::vector<std::string> terms(v);
  for (std::size_t j = 0; j < v; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%03zu", j);
    terms[j] = buf;
  }

  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> how_many(1, std::min(spec.max_topics_per_doc, k));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::discrete_distribution<std::size_t>> word_of;
  for (std::size_t t = 0; t < k; ++t) {
    auto r = out.topics.row(t);
    word_of.emplace_back(r.begin(), r.end());
  }

  std::vector<std::uint32_t> df(v, 0);
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    std::vector<std::size_t> chosen(k);
    for (std::size_t t = 0; t < k; ++t) chosen[t] = t;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(how_many(rng));

    std::vector<double> theta(k, 0.0);
    double total = 0.0;
    for (std::size_t t : chosen) {
      theta[t] = 0.2 + unit(rng);
      total += theta[t];
    }
    for (double& x : theta) x /= total;
    std::discrete_distribution<std::size_t> topic_of(theta.begin(), theta.end());

    Document doc{"doc" + std::to_string(d), {}};
    const std::size_t n = length(rng);
    std::vector<char> seen(v, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t w = word_of[topic_of(rng)](rng);
      doc.tokens.push_back(static_cast<WordId>(w));
      if (!seen[w]) {
        seen[w] = 1;
        ++df[w];
      }
    }
    out.corpus.documents.push_back(std::move(doc));
    out.theta.push_back(std::move(theta));
  }
  out.corpus.vocabulary = Vocabulary(std::move(terms), std::move(df));
  return out;
}

std::vector<std::string> to_text_lines(const Corpus& corpus) {
  std::vector<std::string> lines;
  for (const auto& d : corpus.documents) {
    std::string line;
    for (std::size_t n = 0; n < d.tokens.size(); ++n) {
      if (n) line.push_back(' ');
      line += corpus.vocabulary.term(d.tokens[n]);
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace cdtm
