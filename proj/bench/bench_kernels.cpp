// Serial reference kernels against their OpenMP versions on a synthetic corpus.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <numeric>

#include "cdtm/kernels.hpp"
#include "cdtm/synthetic.hpp"

using namespace cdtm;

namespace {

struct Fixture {
  SyntheticCorpus syn;
  std::vector<BagOfWords> bows;
  TrainConfig cfg;
  ModelParams model;
  std::vector<DocVariational> fresh;

  Fixture() {
    SyntheticSpec s;
    s.num_docs = 400;
    s.vocab_size = 500;
    s.num_topics = 10;
    s.seed = 11;
    syn = make_synthetic_corpus(s);
    cfg.num_topics = 10;
    cfg.lambda = 20.0;
    for (const auto& d : syn.corpus.documents) bows.push_back(bag_of_words(d));
    model = init_model(syn.corpus, cfg, 3);
    model.lambda = cfg.lambda;
    for (const auto& b : bows) fresh.push_back(init_doc_variational(b, model.zeta));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

template <bool Parallel>
void BM_estep(benchmark::State& state) {
  const auto& f = fixture();
  const TopicLogWeights logw(f.model);
  for (auto _ : state) {
    auto states = f.fresh;
    const auto stats = Parallel ? estep_all(f.bows, f.model, logw, f.cfg, states)
                                : estep_all_serial(f.bows, f.model, logw, f.cfg, states);
    benchmark::DoNotOptimize(stats.iterations);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.bows.size()));
}

template <bool Parallel>
void BM_topic_word_counts(benchmark::State& state) {
  const auto& f = fixture();
  const std::size_t v = f.syn.corpus.vocabulary.size();
  for (auto _ : state) {
    const Matrix m = Parallel ? topic_word_counts(f.bows, f.fresh, 10, v)
                              : topic_word_counts_serial(f.bows, f.fresh, 10, v);
    benchmark::DoNotOptimize(m(0, 0));
  }
}

template <bool Parallel>
void BM_count_windows(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<WordId> targets(100);
  std::iota(targets.begin(), targets.end(), WordId{0});
  const auto window = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const auto w = Parallel ? count_windows(f.syn.corpus, window, targets)
                            : count_windows_serial(f.syn.corpus, window, targets);
    benchmark::DoNotOptimize(&w);
  }
}

}  // namespace

BENCHMARK(BM_estep<false>)->Name("estep_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_estep<true>)->Name("estep_all/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_topic_word_counts<false>)->Name("topic_word_counts/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_topic_word_counts<true>)->Name("topic_word_counts/omp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_count_windows<false>)->Name("count_windows/serial")->Arg(10)->Arg(110)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_count_windows<true>)->Name("count_windows/omp")->Arg(10)->Arg(110)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
