#include "cdtm/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cdtm/error.hpp"

namespace cdtm {

void ModelParams::validate() const {
  const std::size_t k = eta.rows();
  if (k < 2) throw DataError("model: need at least two topics");
  if (zeta.size() != k) throw DataError("model: zeta length does not match K");
  for (double z : zeta) {
    if (!(z > 0.0) || !std::isfinite(z)) throw DataError("model: zeta entries must be positive");
  }
  for (std::size_t i = 0; i < k; ++i) {
    double sum = 0.0;
    for (double v : eta.row(i)) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("model: negative or non-finite eta");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DataError("model: eta row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

Matrix expand_phi(const Document& doc, const BagOfWords& bow, const DocVariational& var) {
  const std::size_t k = var.phi.cols();
  Matrix out(doc.tokens.size(), k);
  for (std::size_t n = 0; n < doc.tokens.size(); ++n) {
    auto it = std::lower_bound(bow.types.begin(), bow.types.end(), doc.tokens[n]);
    const auto u = static_cast<std::size_t>(it - bow.types.begin());
    std::copy(var.phi.row(u).begin(), var.phi.row(u).end(), out.row(n).begin());
  }
  return out;
}

void TrainConfig::validate() const {
  if (num_topics < 2) throw ConfigError("K must be at least 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  for (double l : doc_lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("per-document lambda must be >= 0");
  }
  if (!zeta.empty()) {
    if (zeta.size() != num_topics) throw ConfigError("zeta override must have K entries");
    for (double z : zeta) {
      if (!(z > 0.0) || !std::isfinite(z)) throw ConfigError("zeta entries must be positive");
    }
  }
  if (em_max_iters == 0) throw ConfigError("em_max_iters must be positive");
  if (estep_max_iters == 0) throw ConfigError("estep_max_iters must be positive");
  if (newton_max_iters == 0) throw ConfigError("newton_max_iters must be positive");
  if (!(em_rel_tol > 0.0)) throw ConfigError("em_rel_tol must be positive");
  if (!(estep_phi_tol > 0.0)) throw ConfigError("estep_phi_tol must be positive");
  if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
  if (!(armijo_delta > 0.0 && armijo_delta < 0.5)) throw ConfigError("armijo_delta must be in (0, 0.5)");
  if (!(backtrack_rho > 0.0 && backtrack_rho < 1.0)) throw ConfigError("backtrack_rho must be in (0, 1)");
  if (!(gamma_floor > 0.0)) throw ConfigError("gamma_floor must be positive");
}

std::vector<double> resolve_zeta(const TrainConfig& config) {
  if (!config.zeta.empty()) return config.zeta;
  return std::vector<double>(config.num_topics, 1.0 / static_cast<double>(config.num_topics));
}

void normalize_topic_rows(Matrix& eta) {
  for (std::size_t i = 0; i < eta.rows(); ++i) {
    auto row = eta.row(i);
    double sum = 0.0;
    for (double& v : row) {
      v += kEtaFloor;
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

ModelParams init_model(const Corpus& corpus, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t k = config.num_topics;
  const std::size_t v = corpus.vocab_size();
  if (v < k) throw ConfigError("vocabulary size must be at least K");

  std::vector<double> freq(v, 1.0);
  for (const auto& doc : corpus.documents) {
    for (WordId w : doc.tokens) freq[w] += 1.0;
  }

  ModelParams model;
  model.zeta = resolve_zeta(config);
  model.lambda = config.lambda;
  model.eta = Matrix(k, v);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < v; ++j) model.eta(i, j) = freq[j] * jitter(rng);
  }
  normalize_topic_rows(model.eta);
  return model;
}

DocVariational init_doc_variational(const BagOfWords& bow, std::span<const double> zeta) {
  const std::size_t k = zeta.size();
  DocVariational var;
  var.gamma.resize(k);
  const double share = bow.total / static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) var.gamma[i] = zeta[i] + share;
  var.phi = Matrix(bow.types.size(), k, 1.0 / static_cast<double>(k));
  return var;
}

}  // namespace cdtm
