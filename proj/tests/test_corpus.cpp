#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "cdtm/corpus.hpp"
#include "cdtm/error.hpp"
#include "support.hpp"

using namespace cdtm;
using Tokens = std::vector<std::string>;

namespace {

CorpusConfig loose() {
  CorpusConfig c;
  c.min_doc_freq = 1;
  c.max_doc_fraction = 1.0;
  return c;
}

// Windows listed explicitly, then counted by set membership.
struct BruteWindows {
  std::uint64_t total = 0;
  std::map<WordId, std::uint64_t> uni;
  std::map<std::pair<WordId, WordId>, std::uint64_t> pair;
};

BruteWindows brute_windows(const Corpus& c, std::size_t w, const std::vector<WordId>& targets) {
  BruteWindows b;
  const std::set<WordId> tracked(targets.begin(), targets.end());
  for (const auto& doc : c.documents) {
    const std::size_t n = doc.tokens.size();
    if (n == 0) continue;
    std::vector<std::vector<WordId>> windows;
    if (n <= w) {
      windows.push_back(doc.tokens);
    } else {
      for (std::size_t s = 0; s + w <= n; ++s)
        windows.emplace_back(doc.tokens.begin() + static_cast<long>(s),
                             doc.tokens.begin() + static_cast<long>(s + w));
    }
    for (const auto& win : windows) {
      ++b.total;
      std::set<WordId> present;
      for (WordId t : win)
        if (tracked.contains(t)) present.insert(t);
      for (WordId x : present) {
        ++b.uni[x];
        for (WordId y : present)
          if (x < y) ++b.pair[{x, y}];
      }
    }
  }
  return b;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Neural Networks, neural nets.") == Tokens{"neural", "networks", "neural", "nets"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("A the of").empty());
  CHECK(tokenize("e-mail x y2") == Tokens{"mail", "y2"});

  TokenizerConfig keep;
  keep.lowercase = false;
  keep.remove_stopwords = false;
  keep.min_length = 1;
  CHECK(tokenize("A the of", keep) == Tokens{"A", "the", "of"});

  TokenizerConfig custom;
  custom.stopwords = {"neural"};
  CHECK(tokenize("neural the nets", custom) == Tokens{"the", "nets"});
}

TEST_CASE("vocabulary") {
  const Vocabulary v({"alpha", "beta", "gamma"}, {3, 2, 1});
  CHECK(v.size() == 3);
  CHECK(v.find("beta") == 1);
  CHECK(v.find("delta") == -1);
  for (WordId j = 0; j < v.size(); ++j) CHECK(v.find(v.term(j)) == j);
  const Tokens toks{"gamma", "alpha", "gamma"};
  CHECK(v.decode(v.encode(toks)) == toks);
  CHECK(v.encode({"alpha", "zzz", "beta"}) == std::vector<WordId>{0, 1});
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), DataError);
  CHECK_THROWS_AS(Vocabulary({"a", ""}), DataError);
  CHECK_THROWS_AS(Vocabulary({"a", "b"}, {1}), DataError);
}

TEST_CASE("build_corpus") {
  SUBCASE("shared surviving tokens") {
    const std::vector<RawDocument> raw{{"1", "apple banana cherry"},
                                       {"2", "banana cherry dates"},
                                       {"3", "cherry dates elder apple"}};
    const auto r = build_corpus(raw, loose());
    CHECK(r.corpus.vocab_size() == 5);
    CHECK(r.corpus.num_docs() == 3);
    CHECK(r.corpus.vocabulary.terms() == Tokens{"apple", "banana", "cherry", "dates", "elder"});
    CHECK(r.corpus.vocabulary.document_frequency(2) == 3);
    CHECK(r.dropped.empty());
    r.corpus.validate();
  }
  SUBCASE("document emptied by filtering is dropped") {
    const std::vector<RawDocument> raw{{"1", "apple banana"}, {"2", "the of and"}, {"3", "banana"}};
    const auto r = build_corpus(raw, loose());
    CHECK(r.corpus.num_docs() == 2);
    CHECK(r.dropped == Tokens{"2"});
  }
  SUBCASE("minimum document frequency") {
    CorpusConfig c = loose();
    c.min_doc_freq = 2;
    const std::vector<RawDocument> raw{{"1", "apple banana"}, {"2", "banana cherry"}};
    const auto r = build_corpus(raw, c);
    CHECK(r.corpus.vocabulary.terms() == Tokens{"banana"});
  }
  SUBCASE("maximum document fraction") {
    CorpusConfig c = loose();
    c.max_doc_fraction = 0.5;
    const std::vector<RawDocument> raw{
        {"1", "common apple"}, {"2", "common banana"}, {"3", "common apple"}, {"4", "banana"}};
    const auto r = build_corpus(raw, c);
    CHECK_FALSE(r.corpus.vocabulary.contains("common"));
    CHECK(r.corpus.vocabulary.contains("apple"));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(build_corpus({}, loose()), DataError);
    CHECK_THROWS_AS(build_corpus({{"1", "the of"}}, loose()), DataError);
  }
}

TEST_CASE("bag_of_words and validate") {
  const Corpus c = testing::letters_corpus({"abca", "cc"}, 3);
  const auto bow = bag_of_words(c.documents[0]);
  CHECK(bow.types == std::vector<WordId>{0, 1, 2});
  CHECK(bow.counts == std::vector<double>{2, 1, 1});
  CHECK(bow.total == 4);
  CHECK(c.num_tokens() == 6);
  c.validate();

  Corpus bad = c;
  bad.documents[1].tokens.push_back(7);
  CHECK_THROWS_AS(bad.validate(), DataError);
  Corpus empty_doc = c;
  empty_doc.documents[1].tokens.clear();
  CHECK_THROWS_AS(empty_doc.validate(), DataError);
  CHECK_NOTHROW(empty_doc.validate(false));
}

TEST_CASE("split_corpus") {
  std::vector<std::string> docs;
  for (int d = 0; d < 10; ++d) docs.push_back(d % 2 ? "abcab" : "bcdde");
  const Corpus c = testing::letters_corpus(docs, 5);

  const auto [tr, te] = split_corpus(c, 0.8, 7);
  CHECK(tr.num_docs() == 8);
  CHECK(te.num_docs() == 2);

  const auto [tr2, te2] = split_corpus(c, 0.8, 7);
  for (std::size_t i = 0; i < tr.num_docs(); ++i) CHECK(tr.documents[i].id == tr2.documents[i].id);
  for (std::size_t i = 0; i < te.num_docs(); ++i) CHECK(te.documents[i].id == te2.documents[i].id);

  std::multiset<std::string> ids;
  for (const auto& d : tr.documents) ids.insert(d.id);
  for (const auto& d : te.documents) ids.insert(d.id);
  std::multiset<std::string> orig;
  for (const auto& d : c.documents) orig.insert(d.id);
  CHECK(ids == orig);
  CHECK(tr.vocabulary == te.vocabulary);

  const Corpus five = testing::letters_corpus({"ab", "ab", "ab", "ab", "ab"}, 2);
  const auto [a, b] = split_corpus(five, 0.8, 1);
  CHECK(a.num_docs() == 4);
  CHECK(b.num_docs() == 1);
  const auto [a2, b2] = split_corpus(five, 0.01, 1);
  CHECK(a2.num_docs() == 1);
  CHECK(b2.num_docs() == 4);

  CHECK_THROWS_AS(split_corpus(testing::letters_corpus({"ab"}, 2), 0.5, 1), DataError);
  CHECK_THROWS_AS(split_corpus(five, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split_corpus(five, 0.0, 1), ConfigError);
}

TEST_CASE("partition restricts vocabulary to the training part") {
  const Corpus c = testing::letters_corpus({"aab", "abb", "cd", "ac"}, 4);
  const auto [tr, te] = partition_corpus(c, {0, 1}, {2, 3});
  CHECK(tr.vocabulary.terms() == Tokens{"a", "b"});
  CHECK(tr.vocabulary.document_frequencies() == std::vector<std::uint32_t>{2, 2});
  CHECK(te.documents[0].tokens.empty());
  CHECK(te.documents[1].tokens == std::vector<WordId>{0});
}

TEST_CASE("count_windows examples") {
  const Corpus aba = testing::letters_corpus({"aba"}, 2);
  const auto w = count_windows(aba, 2, {0, 1});
  CHECK(w.total_windows() == 2);
  CHECK(w.unigram(0) == 2);
  CHECK(w.unigram(1) == 2);
  CHECK(w.pair(0, 1) == 2);
  CHECK(w.pair(1, 0) == 2);
  CHECK(w.pair(0, 0) == w.unigram(0));

  const Corpus shortdoc = testing::letters_corpus({"abc"}, 4);
  const auto s = count_windows(shortdoc, 110, {0, 3});
  CHECK(s.total_windows() == 1);
  CHECK(s.unigram(0) == 1);
  CHECK(s.unigram(3) == 0);
  CHECK(s.unigram(2) == 0);  // untracked

  Corpus with_empty = testing::letters_corpus({"ab", ""}, 2);
  CHECK(count_windows(with_empty, 5, {0}).total_windows() == 1);

  CHECK_THROWS_AS(count_windows(aba, 2, {}), DataError);
  CHECK_THROWS_AS(count_windows(aba, 1, {0}), ConfigError);
}

TEST_CASE("count_windows equals brute-force enumeration") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 2 + rng() % 8;
    const std::size_t docs = 1 + rng() % 5;
    std::vector<std::string> text;
    std::size_t budget = 100;
    for (std::size_t d = 0; d < docs; ++d) {
      const std::size_t n = std::min<std::size_t>(budget, rng() % 30);
      budget -= n;
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('a' + rng() % v));
      text.push_back(s);
    }
    const Corpus c = testing::letters_corpus(text, v);
    std::vector<WordId> targets;
    for (WordId x = 0; x < v; ++x)
      if (rng() % 3) targets.push_back(x);
    if (targets.empty()) targets.push_back(0);
    const std::size_t win = 2 + rng() % 12;

    const auto brute = brute_windows(c, win, targets);
    const auto serial = count_windows_serial(c, win, targets);
    const auto par = count_windows(c, win, targets);
    CHECK(serial.total_windows() == brute.total);
    CHECK(par.total_windows() == brute.total);
    for (WordId x : targets) {
      const auto ux = brute.uni.contains(x) ? brute.uni.at(x) : 0;
      CHECK(serial.unigram(x) == ux);
      CHECK(par.unigram(x) == ux);
      CHECK(ux <= brute.total);
      for (WordId y : targets) {
        if (x >= y) continue;
        const auto key = std::make_pair(x, y);
        const auto pxy = brute.pair.contains(key) ? brute.pair.at(key) : 0;
        CHECK(serial.pair(x, y) == pxy);
        CHECK(serial.pair(y, x) == pxy);
        CHECK(par.pair(x, y) == pxy);
        CHECK(pxy <= std::min(serial.unigram(x), serial.unigram(y)));
      }
    }
  }
}
