#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cdtm/error.hpp"
#include "cdtm/eval.hpp"
#include "cdtm/inference.hpp"
#include "cdtm/specialfn.hpp"
#include "cdtm/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cdtm;

namespace {

std::vector<double> colsums(const BagOfWords& bow, const Matrix& phi) {
  std::vector<double> c(phi.cols(), 0.0);
  for (std::size_t r = 0; r < phi.rows(); ++r)
    for (std::size_t i = 0; i < phi.cols(); ++i) c[i] += bow.counts[r] * phi(r, i);
  return c;
}

double log_dirichlet(const std::vector<double>& x, const std::vector<double>& a) {
  double s = 0.0, la = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i];
    la += std::lgamma(a[i]) - (a[i] - 1.0) * std::log(x[i]);
  }
  return std::lgamma(s) - la;
}

const SyntheticCorpus& synthetic() {
  static const SyntheticCorpus s = make_synthetic_corpus(SyntheticSpec{});
  return s;
}

double mean_entropy(const std::vector<DocVariational>& per_doc) {
  std::vector<std::vector<double>> g;
  for (const auto& v : per_doc) g.push_back(v.gamma);
  return entropy_stats(g).mean;
}

}  // namespace

TEST_CASE("gamma objective derivatives against finite differences") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const auto s = oracle::random_state(rng);
    const Matrix h = hess_gamma(s.gamma, s.zeta, s.colsums, s.lambda);
    for (std::size_t i = 0; i < s.gamma.size(); ++i) {
      const double g = grad_gamma(s.gamma, s.zeta, s.colsums, s.lambda, i);
      const double d = hess_gamma_diag(s.gamma, s.zeta, s.colsums, s.lambda, i);
      CHECK(oracle::rel(g, oracle::fd_grad(s, i)) < 1e-5);
      CHECK(oracle::rel(d, oracle::fd_hess(s, i, i)) < 1e-4);
      CHECK(oracle::rel(h(i, i), d) < 1e-9);
      const std::size_t j = (i + 1) % s.gamma.size();
      CHECK(oracle::rel(h(i, j), oracle::fd_hess(s, i, j)) < 1e-4);
      CHECK(h(i, j) == h(j, i));
    }
  }
}

TEST_CASE("coordinate objective agrees with the full objective") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const auto s = oracle::random_state(rng);
    const std::size_t i = rng() % s.gamma.size();
    const CoordinateObjective f(s.gamma, s.zeta, s.colsums, s.lambda, i);
    const double x0 = s.gamma[i], x1 = 1.7 * s.gamma[i];
    auto g1 = s.gamma;
    g1[i] = x1;
    const double full = elbo_gamma_part(g1, s.zeta, s.colsums, s.lambda) -
                        elbo_gamma_part(s.gamma, s.zeta, s.colsums, s.lambda);
    CHECK(std::abs((f.value(x1) - f.value(x0)) - full) <= 1e-9 * (1.0 + std::abs(full)));
    CHECK(oracle::rel(f.derivative(x0), grad_gamma(s.gamma, s.zeta, s.colsums, s.lambda, i)) < 1e-9);
    CHECK(oracle::rel(f.second_derivative(x0),
                      hess_gamma_diag(s.gamma, s.zeta, s.colsums, s.lambda, i)) < 1e-9);
  }
}

TEST_CASE("LDA fixed point and symmetry") {
  const std::vector<double> zeta{0.2, 0.2, 0.2, 0.2}, cs{10.0, 3.0, 0.5, 40.0};
  std::vector<double> fixed(4);
  for (int i = 0; i < 4; ++i) fixed[i] = zeta[i] + cs[i];
  double s = 0.0;
  for (double v : fixed) s += v;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(grad_gamma(fixed, zeta, cs, 0.0, i)) < 1e-8);
    CHECK(std::abs(hess_gamma_diag(fixed, zeta, cs, 0.0, i) -
                   (-trigamma(fixed[i]) + trigamma(s))) < 1e-12);
    CHECK(hess_gamma_diag(fixed, zeta, cs, 0.0, i) < 0.0);
  }

  const std::vector<double> g(5, 2.5), z(5, 0.3), c(5, 7.0);
  for (double lambda : {0.0, 3.0, 40.0})
    for (std::size_t i = 1; i < 5; ++i) {
      CHECK(grad_gamma(g, z, c, lambda, i) == grad_gamma(g, z, c, lambda, 0));
      CHECK(hess_gamma_diag(g, z, c, lambda, i) == hess_gamma_diag(g, z, c, lambda, 0));
    }

  // penalty block at gamma = (1, 1) is -0.5 lambda
  const std::vector<double> one{1.0, 1.0}, z2{0.5, 0.5}, c2{2.0, 1.0};
  for (double lambda : {1.0, 35.0})
    CHECK(std::abs(elbo_gamma_part(one, z2, c2, lambda) - elbo_gamma_part(one, z2, c2, 0.0) +
                   0.5 * lambda) < 1e-12);
}

TEST_CASE("newton_coordinate_step") {
  TrainConfig cfg;
  SUBCASE("converges to the LDA coordinate optimum") {
    const std::vector<double> zeta{0.1, 0.1, 0.1}, cs{12.0, 0.7, 30.0};
    std::vector<double> g{0.1 + 12.0, 0.1 + 0.7, 0.1 + 30.0};
    for (double start : {0.01, 3.0, 500.0}) {
      g[1] = start;
      for (int it = 0; it < 200; ++it) {
        const auto st = newton_coordinate_step(g, 1, zeta, cs, 0.0, cfg);
        CHECK(st.objective_after >= st.objective_before);
        g[1] = st.value;
        if (st.converged) break;
      }
      CHECK(std::abs(g[1] - 0.8) < 1e-6);
    }
  }
  SUBCASE("small step leaves gamma unchanged") {
    const std::vector<double> zeta{0.5, 0.5}, cs{3.0, 4.0}, g{3.5, 4.5};
    const auto st = newton_coordinate_step(g, 0, zeta, cs, 0.0, cfg);
    CHECK(st.converged);
    CHECK(st.value == g[0]);
    CHECK(st.alpha == 0.0);
  }
  SUBCASE("line search keeps gamma above the floor") {
    std::mt19937_64 rng(77);
    int hits = 0;
    for (int t = 0; t < 20000 && hits < 20; ++t) {
      const auto s = oracle::random_state(rng);
      const std::size_t i = rng() % s.gamma.size();
      const auto st = newton_coordinate_step(s.gamma, i, s.zeta, s.colsums, s.lambda, cfg);
      CHECK(st.value >= cfg.gamma_floor);
      CHECK(st.objective_after >= st.objective_before);
      if (s.gamma[i] + st.delta < cfg.gamma_floor && st.alpha > 0.0) {
        ++hits;
        CHECK(st.alpha < 1.0);
      }
    }
    CHECK(hits > 0);
  }
}

TEST_CASE("block Newton step solves the dense Newton system") {
  TrainConfig cfg;
  std::mt19937_64 rng(31);
  int undamped = 0;
  for (int t = 0; t < 300; ++t) {
    const auto s = oracle::random_state(rng);
    const auto st = newton_block_step(s.gamma, s.zeta, s.colsums, s.lambda, cfg);
    CHECK(st.objective_after >= st.objective_before);
    for (double v : st.value) CHECK(v >= cfg.gamma_floor);
    if (st.damped || st.unusable) continue;
    ++undamped;
    const Matrix h = hess_gamma(s.gamma, s.zeta, s.colsums, s.lambda);
    std::vector<double> minus_g(s.gamma.size());
    for (std::size_t i = 0; i < minus_g.size(); ++i)
      minus_g[i] = -grad_gamma(s.gamma, s.zeta, s.colsums, s.lambda, i);
    const auto ref = oracle::dense_solve(h, minus_g);
    double scale = 0.0;
    for (double v : ref) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(std::abs(st.delta[i] - ref[i]) <= 1e-7 * std::max(scale, 1e-3));
  }
  CHECK(undamped > 50);
}

TEST_CASE("update_phi") {
  ModelParams m;
  m.zeta = {0.5, 0.5};
  m.eta = Matrix(2, 2, 0.5);
  BagOfWords bow{{0}, {1.0}, 1.0};
  const Matrix p = update_phi(bow, std::vector<double>{3.0, 3.0}, m);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  m.eta(0, 0) = 0.9, m.eta(0, 1) = 0.1;
  m.eta(1, 0) = 1e-12, m.eta(1, 1) = 1.0 - 1e-12;
  const Matrix q = update_phi(bow, std::vector<double>{3.0, 3.0}, m);
  CHECK(q(0, 0) > 1.0 - 1e-11);
  CHECK(std::abs(q(0, 1) - 1e-12 / 0.9) < 1e-15);

  // K = 3 against the formula written out
  ModelParams m3;
  m3.zeta = {0.1, 0.1, 0.1};
  m3.eta = Matrix(3, 4);
  const double rows[3][4] = {{0.1, 0.2, 0.3, 0.4}, {0.7, 0.1, 0.1, 0.1}, {0.25, 0.25, 0.25, 0.25}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) m3.eta(i, j) = rows[i][j];
  const std::vector<double> g{1.3, 4.1, 0.6};
  BagOfWords b3{{0, 2, 3}, {1.0, 2.0, 1.0}, 4.0};
  const Matrix r = update_phi(b3, g, m3);
  for (std::size_t n = 0; n < 3; ++n) {
    double w[3], s = 0.0;
    for (int i = 0; i < 3; ++i) {
      w[i] = rows[i][b3.types[n]] * std::exp(digamma(g[i]) - digamma(6.0));
      s += w[i];
    }
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r(n, i) - w[i] / s) < 1e-14);
  }
}

TEST_CASE("estep_document") {
  const auto& syn = synthetic();
  TrainConfig cfg;
  cfg.num_topics = 5;
  cfg.estep_max_iters = 2000;
  ModelParams model;
  model.eta = syn.topics;
  normalize_topic_rows(model.eta);
  model.zeta = resolve_zeta(cfg);

  SUBCASE("lambda = 0 reproduces the LDA closed form") {
    for (std::size_t d = 0; d < 10; ++d) {
      const auto [var, stats] = estep_document(syn.corpus.documents[d], model, 0.0, cfg);
      CHECK(stats.converged);
      const auto bow = bag_of_words(syn.corpus.documents[d]);
      const auto cs = colsums(bow, var.phi);
      for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(var.gamma[i] - (model.zeta[i] + cs[i])) < 1e-5);
    }
  }
  SUBCASE("coordinate-only solver also reaches the closed form") {
    cfg.block_newton = false;
    cfg.estep_max_iters = 20000;
    // per-sweep moves shrink slowly, so stop on much smaller ones
    cfg.newton_tol = 1e-9;
    cfg.estep_phi_tol = 1e-10;
    const auto& doc = syn.corpus.documents[0];
    const auto [var, stats] = estep_document(doc, model, 0.0, cfg);
    CHECK(stats.converged);
    const auto cs = colsums(bag_of_words(doc), var.phi);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(var.gamma[i] - (model.zeta[i] + cs[i])) < 1e-4);
  }
  SUBCASE("large lambda concentrates a two-topic document") {
    int checked = 0;
    for (std::size_t d = 0; d < syn.corpus.num_docs(); ++d) {
      int active = 0;
      for (double t : syn.theta[d]) active += t > 0.0;
      if (active != 2) continue;
      ++checked;
      const auto& doc = syn.corpus.documents[d];
      const auto a = estep_document(doc, model, 0.0, cfg).first;
      const auto b = estep_document(doc, model, 100.0, cfg).first;
      CHECK(entropy(normalize_gamma(b.gamma)) < entropy(normalize_gamma(a.gamma)));
    }
    CHECK(checked > 0);
  }
  SUBCASE("every accepted step increases the document objective") {
    for (double lambda : {5.0, 35.0}) {
      const auto& doc = syn.corpus.documents[1];
      const auto bow = bag_of_words(doc);
      const TopicLogWeights logw(model);
      DocVariational state = init_doc_variational(bow, model.zeta);
      std::size_t steps = 0;
      const StepObserver obs = [&](const StepEvent& e) {
        ++steps;
        const double before = elbo_gamma_part(e.gamma_before, e.zeta, e.phi_colsums, e.lambda);
        const double after = elbo_gamma_part(e.gamma_after, e.zeta, e.phi_colsums, e.lambda);
        CHECK(after >= before - 1e-12 * std::abs(before));
      };
      estep_document(bow, model, logw, lambda, cfg, state, &obs, 1);
      CHECK(steps > 0);
    }
  }
  CHECK_THROWS_AS(estep_document(Document{"e", {}}, model, 0.0, cfg), DataError);
}

TEST_CASE("mstep") {
  SUBCASE("one word, phi = (1, 0)") {
    BagOfWords bow{{2}, {1.0}, 1.0};
    DocVariational v{{1.0, 1.0}, Matrix(1, 2)};
    v.phi(0, 0) = 1.0;
    const Matrix eta = mstep({bow}, {v}, 4);
    CHECK(eta(0, 2) > 1.0 - 1e-11);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(eta(1, j) - 0.25) < 1e-15);
  }
  SUBCASE("uniform phi gives corpus frequencies") {
    const Corpus c = testing::letters_corpus({"aab", "bcc", "c"}, 3);
    std::vector<BagOfWords> bows;
    std::vector<DocVariational> states;
    for (const auto& d : c.documents) {
      bows.push_back(bag_of_words(d));
      states.push_back(init_doc_variational(bows.back(), std::vector<double>{0.5, 0.5}));
    }
    const Matrix eta = mstep(bows, states, 3);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(eta(i, 0) - 2.0 / 7.0) < 1e-11);
      CHECK(std::abs(eta(i, 2) - 3.0 / 7.0) < 1e-11);
    }
  }
  SUBCASE("random states against token-level accumulation") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    const Corpus c = testing::letters_corpus({"abcabcdd", "eeeab", "dcba", "e"}, 5);
    std::vector<BagOfWords> bows;
    std::vector<DocVariational> states;
    Matrix ref(3, 5, 0.0);
    for (const auto& d : c.documents) {
      bows.push_back(bag_of_words(d));
      DocVariational v{{1, 1, 1}, Matrix(bows.back().types.size(), 3)};
      for (std::size_t r = 0; r < v.phi.rows(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i) s += (v.phi(r, i) = u(rng));
        for (std::size_t i = 0; i < 3; ++i) v.phi(r, i) /= s;
      }
      const Matrix full = expand_phi(d, bows.back(), v);
      for (std::size_t n = 0; n < d.tokens.size(); ++n)
        for (std::size_t i = 0; i < 3; ++i) ref(i, d.tokens[n]) += full(n, i);
      states.push_back(v);
    }
    normalize_topic_rows(ref);
    const Matrix eta = mstep(bows, states, 5);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(eta(i, j) - ref(i, j)) < 1e-14);
  }
}

TEST_CASE("document ELBO against Monte-Carlo over q") {
  ModelParams m;
  m.zeta = {0.7, 0.4};
  m.eta = Matrix(2, 3);
  const double rows[2][3] = {{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) m.eta(i, j) = rows[i][j];
  const TopicLogWeights logw(m);

  struct Case {
    BagOfWords bow;
    Matrix phi;
  };
  std::vector<Case> cases;
  {
    Case a{{{1}, {1.0}, 1.0}, Matrix(1, 2)};
    a.phi(0, 0) = 0.7, a.phi(0, 1) = 0.3;
    cases.push_back(a);
    Case b{{{0, 2}, {2.0, 1.0}, 3.0}, Matrix(2, 2)};
    b.phi(0, 0) = 0.2, b.phi(0, 1) = 0.8, b.phi(1, 0) = 0.55, b.phi(1, 1) = 0.45;
    cases.push_back(b);
  }
  const std::vector<double> gamma{2.3, 1.4};
  for (double lambda : {0.0, 4.0}) {
    for (const auto& c : cases) {
      const DocVariational var{gamma, c.phi};
      const ElboBreakdown e = document_elbo(c.bow, var, m, logw, lambda);
      CHECK(std::abs(e.total - (e.log_likelihood_terms + e.entropy_of_q + e.penalty_term)) < 1e-9);
      if (lambda == 0.0) CHECK(e.penalty_term == 0.0);
      CHECK(e.penalty_term <= 0.0);

      std::mt19937_64 rng(123);
      testing::MeanSe mc;
      for (int s = 0; s < 1000000; ++s) {
        const auto th = testing::dirichlet_draw(rng, gamma);
        double x = log_dirichlet(th, m.zeta) - log_dirichlet(th, gamma);
        for (std::size_t r = 0; r < c.bow.types.size(); ++r)
          for (std::size_t i = 0; i < 2; ++i) {
            const double p = c.phi(r, i);
            x += c.bow.counts[r] * p * (std::log(th[i]) + std::log(rows[i][c.bow.types[r]]) - std::log(p));
          }
        x += lambda * (th[0] * std::log(th[0]) + th[1] * std::log(th[1]));
        mc.add(x);
      }
      CHECK(std::abs(mc.mean - e.total) < 4 * mc.se());
    }
  }
}

TEST_CASE("penalty is non-increasing in lambda") {
  const auto& syn = synthetic();
  TrainConfig cfg;
  cfg.num_topics = 5;
  cfg.em_max_iters = 3;
  const auto r = fit(syn.corpus, cfg);
  double prev = 0.0;
  for (double lambda : {0.0, 1.0, 10.0, 50.0}) {
    TrainConfig c2 = cfg;
    c2.lambda = lambda;
    const auto e = penalized_elbo(syn.corpus, r.model, r.per_doc, c2);
    CHECK(e.penalty_term <= prev);
    prev = e.penalty_term;
  }
}

TEST_CASE("fit") {
  const auto& syn = synthetic();
  TrainConfig cfg;
  cfg.num_topics = 5;

  SUBCASE("one iteration") {
    cfg.em_max_iters = 1;
    const auto r = fit(syn.corpus, cfg);
    CHECK(r.iterations_run == 1);
    CHECK(r.elbo_trace.size() == 1);
  }
  SUBCASE("deterministic under a fixed seed") {
    cfg.lambda = 5.0;
    const auto a = fit(syn.corpus, cfg);
    const auto b = fit(syn.corpus, cfg);
    REQUIRE(a.elbo_trace.size() == b.elbo_trace.size());
    for (std::size_t t = 0; t < a.elbo_trace.size(); ++t) CHECK(a.elbo_trace[t].total == b.elbo_trace[t].total);
    CHECK(a.model.eta == b.model.eta);
    for (std::size_t d = 0; d < a.per_doc.size(); ++d) CHECK(a.per_doc[d].gamma == b.per_doc[d].gamma);
  }
  SUBCASE("lambda = 0 trace is monotone") {
    const auto r = fit(syn.corpus, cfg);
    CHECK(r.converged);
    for (std::size_t t = 1; t < r.elbo_trace.size(); ++t)
      CHECK(r.elbo_trace[t].total >= r.elbo_trace[t - 1].total - 1e-8 * std::abs(r.elbo_trace[t - 1].total));
  }
  SUBCASE("lambda = 35 concentrates documents") {
    const auto lda = fit(syn.corpus, cfg);
    cfg.lambda = 35.0;
    const auto cdtm = fit(syn.corpus, cfg);
    CHECK(mean_entropy(cdtm.per_doc) < mean_entropy(lda.per_doc));
  }
  SUBCASE("per-document lambda") {
    cfg.doc_lambda.assign(syn.corpus.num_docs(), 0.0);
    const auto a = fit(syn.corpus, cfg);
    cfg.doc_lambda.clear();
    const auto b = fit(syn.corpus, cfg);
    CHECK(a.model.eta == b.model.eta);
    cfg.doc_lambda = {1.0};
    CHECK_THROWS_AS(fit(syn.corpus, cfg), ConfigError);
  }
  SUBCASE("rows stay stochastic") {
    cfg.lambda = 35.0;
    cfg.em_max_iters = 5;
    FitHooks hooks;
    hooks.after_estep = [](std::size_t, const std::vector<DocVariational>& states) {
      for (const auto& s : states)
        for (std::size_t r = 0; r < s.phi.rows(); ++r) {
          double sum = 0.0;
          for (double p : s.phi.row(r)) sum += p;
          CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    };
    hooks.after_mstep = [](std::size_t, const ModelParams& m) { CHECK_NOTHROW(m.validate()); };
    fit(syn.corpus, cfg, hooks);
  }
}

TEST_CASE("held-out inference") {
  const auto& syn = synthetic();
  TrainConfig cfg;
  cfg.num_topics = 5;
  cfg.lambda = 5.0;
  const auto r = fit(syn.corpus, cfg);
  for (std::size_t d = 0; d < 10; ++d) {
    const auto v = infer_document(syn.corpus.documents[d], r.model, cfg.lambda, cfg);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(v.gamma[i] - r.per_doc[d].gamma[i]) < 1e-6);
  }

  Document oov{"x", {1000, 2000}};
  CHECK_THROWS_AS(infer_document(oov, r.model, 0.0, cfg), DataError);
  Document mixed{"y", syn.corpus.documents[0].tokens};
  mixed.tokens.push_back(5000);
  CHECK_NOTHROW(infer_document(mixed, r.model, 0.0, cfg));

  const auto& doc = syn.corpus.documents[3];
  const double h0 = entropy(normalize_gamma(infer_document(doc, r.model, 0.0, cfg).gamma));
  const double h1 = entropy(normalize_gamma(infer_document(doc, r.model, 100.0, cfg).gamma));
  CHECK(h1 <= h0);
}

TEST_CASE("perplexity") {
  SUBCASE("uniform topics give perplexity V") {
    const std::size_t v = 50;
    std::mt19937_64 rng(2);
    Corpus c{Vocabulary([&] {
               std::vector<std::string> t;
               for (std::size_t j = 0; j < v; ++j) t.push_back("w" + std::to_string(j));
               return t;
             }()),
             {}};
    for (int d = 0; d < 5; ++d) {
      Document doc{"d" + std::to_string(d), {}};
      for (int n = 0; n < 3000; ++n) doc.tokens.push_back(static_cast<WordId>(rng() % v));
      c.documents.push_back(doc);
    }
    ModelParams m;
    m.eta = Matrix(2, v, 1.0 / v);
    m.zeta = {0.5, 0.5};
    TrainConfig cfg;
    cfg.num_topics = 2;
    const double p = perplexity(c, m, cfg);
    CHECK(p >= static_cast<double>(v));
    CHECK(p < 1.01 * static_cast<double>(v));
  }
  SUBCASE("more EM iterations fit the training data better") {
    const auto& syn = synthetic();
    TrainConfig cfg;
    cfg.num_topics = 5;
    cfg.em_max_iters = 1;
    const auto early = fit(syn.corpus, cfg);
    cfg.em_max_iters = 200;
    const auto late = fit(syn.corpus, cfg);
    const double pe = perplexity(syn.corpus, early.model, cfg);
    const double pl = perplexity(syn.corpus, late.model, cfg);
    CHECK(std::isfinite(pl));
    CHECK(pl <= pe);
    CHECK(perplexity(syn.corpus, late.model, cfg) == pl);
  }
  SUBCASE("errors") {
    TrainConfig cfg;
    cfg.num_topics = 2;
    ModelParams m;
    m.eta = Matrix(2, 3, 1.0 / 3.0);
    m.zeta = {0.5, 0.5};
    Corpus empty{Vocabulary({"a", "b", "c"}), {}};
    CHECK_THROWS_AS(perplexity(empty, m, cfg), DataError);
    Corpus blank = empty;
    blank.documents.push_back(Document{"z", {}});
    CHECK_THROWS_AS(perplexity(blank, m, cfg), DataError);
  }
}
