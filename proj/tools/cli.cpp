#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdtm/error.hpp"
#include "cdtm/eval.hpp"
#include "cdtm/inference.hpp"
#include "cdtm/io.hpp"
#include "cdtm/kernels.hpp"

#ifndef CDTM_VERSION
#define CDTM_VERSION "0.0.0"
#endif

namespace cdtm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Logging, controlled by CDTM_LOG (quiet|error|warn|info|debug or 0-4).

enum class Level { kQuiet = 0, kError, kWarn, kInfo, kDebug };

Level level_from_env() {
  const char* raw = std::getenv("CDTM_LOG");
  if (raw == nullptr) return Level::kWarn;
  std::string v(raw);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "quiet" || v == "off" || v == "0") return Level::kQuiet;
  if (v == "error" || v == "1") return Level::kError;
  if (v == "info" || v == "3") return Level::kInfo;
  if (v == "debug" || v == "4") return Level::kDebug;
  return Level::kWarn;
}

class Logger {
 public:
  Logger(std::ostream& sink, Level level) : sink_(sink), level_(level) {}

  void error(const std::string& msg) const { write(Level::kError, "error", msg); }
  void warn(const std::string& msg) const { write(Level::kWarn, "warning", msg); }
  void info(const std::string& msg) const { write(Level::kInfo, "info", msg); }
  void debug(const std::string& msg) const { write(Level::kDebug, "debug", msg); }

 private:
  void write(Level l, const char* tag, const std::string& msg) const {
    if (l <= level_) sink_ << "cdtm " << tag << ": " << msg << '\n';
  }
  std::ostream& sink_;
  Level level_;
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Manifest serialization

const char* reduction_name(Reduction r) {
  return r == Reduction::kFast ? "fast" : "deterministic";
}

Reduction parse_reduction(const std::string& s) {
  if (s == "deterministic") return Reduction::kDeterministic;
  if (s == "fast") return Reduction::kFast;
  throw ConfigError("unknown reduction mode '" + s + "'");
}

json train_to_json(const TrainConfig& c) {
  return {{"num_topics", c.num_topics},
          {"lambda", c.lambda},
          {"doc_lambda", c.doc_lambda},
          {"zeta", c.zeta},
          {"em_max_iters", c.em_max_iters},
          {"em_rel_tol", c.em_rel_tol},
          {"estep_max_iters", c.estep_max_iters},
          {"estep_phi_tol", c.estep_phi_tol},
          {"newton_max_iters", c.newton_max_iters},
          {"newton_tol", c.newton_tol},
          {"armijo_delta", c.armijo_delta},
          {"backtrack_rho", c.backtrack_rho},
          {"max_backtracks", c.max_backtracks},
          {"block_newton", c.block_newton},
          {"gamma_floor", c.gamma_floor},
          {"seed", c.seed},
          {"reduction", reduction_name(c.reduction)},
          {"refresh_local", c.refresh_local}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  j.at("num_topics").get_to(c.num_topics);
  j.at("lambda").get_to(c.lambda);
  j.at("doc_lambda").get_to(c.doc_lambda);
  j.at("zeta").get_to(c.zeta);
  j.at("em_max_iters").get_to(c.em_max_iters);
  j.at("em_rel_tol").get_to(c.em_rel_tol);
  j.at("estep_max_iters").get_to(c.estep_max_iters);
  j.at("estep_phi_tol").get_to(c.estep_phi_tol);
  j.at("newton_max_iters").get_to(c.newton_max_iters);
  j.at("newton_tol").get_to(c.newton_tol);
  j.at("armijo_delta").get_to(c.armijo_delta);
  j.at("backtrack_rho").get_to(c.backtrack_rho);
  j.at("max_backtracks").get_to(c.max_backtracks);
  j.at("block_newton").get_to(c.block_newton);
  j.at("gamma_floor").get_to(c.gamma_floor);
  j.at("seed").get_to(c.seed);
  c.reduction = parse_reduction(j.at("reduction").get<std::string>());
  j.at("refresh_local").get_to(c.refresh_local);
  return c;
}

json corpus_to_json(const CorpusConfig& c) {
  std::vector<std::string> stop(c.tokenizer.stopwords.begin(), c.tokenizer.stopwords.end());
  std::sort(stop.begin(), stop.end());
  return {{"lowercase", c.tokenizer.lowercase},
          {"remove_stopwords", c.tokenizer.remove_stopwords},
          {"min_length", c.tokenizer.min_length},
          {"stopwords", stop},
          {"min_doc_freq", c.min_doc_freq},
          {"max_doc_fraction", c.max_doc_fraction}};
}

CorpusConfig corpus_from_json(const json& j) {
  CorpusConfig c;
  j.at("lowercase").get_to(c.tokenizer.lowercase);
  j.at("remove_stopwords").get_to(c.tokenizer.remove_stopwords);
  j.at("min_length").get_to(c.tokenizer.min_length);
  for (const auto& w : j.at("stopwords")) c.tokenizer.stopwords.insert(w.get<std::string>());
  j.at("min_doc_freq").get_to(c.min_doc_freq);
  j.at("max_doc_fraction").get_to(c.max_doc_fraction);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct Shared {
  std::string input;
  std::string encoded;
  std::string vocab;
  std::string out;
  std::string config;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct Command {
  explicit Command(CLI::App* sub) : app(sub) {}

  CLI::App* app;
  Shared shared;
  TrainConfig train;
  CorpusConfig corpus;
  std::string reduction = "deterministic";
  bool coordinate_only = false;
  bool keep_stopwords = false;
  bool keep_case = false;
};

void add_shared(Command& c) {
  CLI::App* a = c.app;
  a->add_option("--input", c.shared.input, "Raw text: a directory of files or one document per line");
  a->add_option("--out", c.shared.out, "Output directory (required)");
  a->add_option("--seed", c.shared.seed, "RNG seed")->capture_default_str();
  a->add_option("--threads", c.shared.threads, "OpenMP threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  a->add_option("--config", c.shared.config, "key=value file; flags given explicitly win");
}

void add_encoded(Command& c) {
  c.app->add_option("--encoded", c.shared.encoded, "Encoded corpus (doc_id<TAB>N<TAB>ids)");
  c.app->add_option("--vocab", c.shared.vocab, "Vocabulary TSV");
}

void add_corpus_options(Command& c) {
  CLI::App* a = c.app;
  a->add_option("--min-doc-freq", c.corpus.min_doc_freq, "Drop terms in fewer documents")
      ->capture_default_str();
  a->add_option("--max-doc-fraction", c.corpus.max_doc_fraction,
                "Drop terms in more than this share of documents")
      ->capture_default_str();
  a->add_option("--min-length", c.corpus.tokenizer.min_length, "Minimum token length")
      ->capture_default_str();
  a->add_flag("--keep-stopwords", c.keep_stopwords, "Do not remove stopwords");
  a->add_flag("--keep-case", c.keep_case, "Do not lowercase");
}

void add_train_options(Command& c) {
  CLI::App* a = c.app;
  TrainConfig& t = c.train;
  a->add_option("--k", t.num_topics, "Number of topics")->capture_default_str();
  a->add_option("--lambda", t.lambda, "Entropy penalty weight")->capture_default_str();
  a->add_option("--zeta", t.zeta, "Dirichlet prior (one value per topic; default 1/K)")
      ->delimiter(',');
  a->add_option("--em-max-iters", t.em_max_iters)->capture_default_str();
  a->add_option("--em-tol", t.em_rel_tol, "Relative ELBO change")->capture_default_str();
  a->add_option("--estep-max-iters", t.estep_max_iters)->capture_default_str();
  a->add_option("--estep-tol", t.estep_phi_tol, "Mean absolute phi change")->capture_default_str();
  a->add_option("--newton-max-iters", t.newton_max_iters)->capture_default_str();
  a->add_option("--newton-tol", t.newton_tol)->capture_default_str();
  a->add_option("--armijo-delta", t.armijo_delta)->capture_default_str();
  a->add_option("--backtrack-rho", t.backtrack_rho)->capture_default_str();
  a->add_option("--max-backtracks", t.max_backtracks)->capture_default_str();
  a->add_flag("--coordinate-only", c.coordinate_only,
              "Plain per-coordinate Newton sweeps for gamma (no block steps)");
  a->add_option("--reduction", c.reduction, "deterministic or fast")
      ->check(CLI::IsMember({"deterministic", "fast"}))
      ->capture_default_str();
}

// Fills options the command line left unset from a key=value file.
void apply_config_file(Command& c) {
  if (c.shared.config.empty()) return;
  std::istringstream in(read_text(c.shared.config));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(c.shared.config + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    CLI::Option* opt = c.app->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw ConfigError(c.shared.config + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(c.shared.config + ": bad value for '" + key + "': " + e.what());
    }
  }
}

void finalize(Command& c) {
  apply_config_file(c);
  if (c.shared.out.empty()) throw ConfigError("--out is required");
  c.train.seed = c.shared.seed;
  c.train.reduction = parse_reduction(c.reduction);
  if (c.coordinate_only) c.train.block_newton = false;
  if (c.keep_stopwords) c.corpus.tokenizer.remove_stopwords = false;
  if (c.keep_case) c.corpus.tokenizer.lowercase = false;
  omp_set_num_threads(c.shared.threads > 0 ? c.shared.threads : omp_get_num_procs());
}

RunManifest start_manifest(const Command& c, const std::string& name) {
  RunManifest m;
  m.command = name;
  m.tool_version = CDTM_VERSION;
  m.seed = c.shared.seed;
  m.threads = c.shared.threads;
  m.train = c.train;
  m.corpus = c.corpus;
  if (!c.shared.input.empty()) m.inputs["input"] = c.shared.input;
  if (!c.shared.encoded.empty()) m.inputs["encoded"] = c.shared.encoded;
  if (!c.shared.vocab.empty()) m.inputs["vocab"] = c.shared.vocab;
  if (!c.shared.config.empty()) m.inputs["config"] = c.shared.config;
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir) {
  const fs::path path = out_dir / "manifest.json";
  m.outputs["manifest"] = path.string();
  write_text(path, manifest_to_json(m));
}

Corpus load_corpus(const Command& c, std::vector<std::string>* dropped) {
  if (!c.shared.encoded.empty()) {
    if (c.shared.vocab.empty()) throw ConfigError("--encoded needs --vocab");
    if (!c.shared.input.empty()) throw ConfigError("give either --input or --encoded, not both");
    Corpus corpus = io::read_encoded_corpus(c.shared.encoded, io::read_vocabulary(c.shared.vocab));
    corpus.validate(false);
    return corpus;
  }
  if (c.shared.input.empty()) throw ConfigError("one of --input or --encoded is required");
  BuildResult built = build_corpus(io::read_raw_documents(c.shared.input), c.corpus);
  if (dropped != nullptr) *dropped = std::move(built.dropped);
  return std::move(built.corpus);
}

// Documents for an existing vocabulary: raw text is tokenized and encoded
// with it, out-of-vocabulary tokens dropped.
Corpus load_with_vocabulary(const Command& c, const Vocabulary& vocab,
                            const TokenizerConfig& tokenizer) {
  if (!c.shared.encoded.empty()) {
    if (!c.shared.input.empty()) throw ConfigError("give either --input or --encoded, not both");
    return io::read_encoded_corpus(c.shared.encoded, vocab);
  }
  if (c.shared.input.empty()) throw ConfigError("one of --input or --encoded is required");
  Corpus corpus;
  corpus.vocabulary = vocab;
  for (const RawDocument& raw : io::read_raw_documents(c.shared.input)) {
    corpus.documents.push_back({raw.id, vocab.encode(tokenize(raw.text, tokenizer))});
  }
  return corpus;
}

// The tokenizer a model was trained with, from the manifest next to it.
TokenizerConfig tokenizer_near(const fs::path& model_path, const Logger& log) {
  const fs::path manifest = model_path.parent_path() / "manifest.json";
  if (!fs::exists(manifest)) {
    log.info("no manifest next to the model; using the default tokenizer");
    return {};
  }
  return manifest_from_json(read_text(manifest)).corpus.tokenizer;
}

fs::path default_vocab(const Command& c, const fs::path& model_path) {
  return c.shared.vocab.empty() ? model_path.parent_path() / "vocab.tsv" : fs::path(c.shared.vocab);
}

Corpus without_empty(const Corpus& corpus, const Logger& log, std::vector<std::size_t>* kept) {
  Corpus out;
  out.vocabulary = corpus.vocabulary;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    if (corpus.documents[d].tokens.empty()) {
      log.warn("document '" + corpus.documents[d].id +
               "' has no in-vocabulary tokens; skipped");
      continue;
    }
    out.documents.push_back(corpus.documents[d]);
    if (kept != nullptr) kept->push_back(d);
  }
  return out;
}

// Frozen-topic inference for every document of `corpus` (none may be empty).
std::vector<DocVariational> infer_all(const Corpus& corpus, const ModelParams& model,
                                      const TrainConfig& config) {
  std::vector<BagOfWords> bows;
  std::vector<DocVariational> states;
  for (const Document& doc : corpus.documents) {
    bows.push_back(bag_of_words(doc));
    states.push_back(init_doc_variational(bows.back(), model.zeta));
  }
  estep_all(bows, model, TopicLogWeights(model), config, states);
  return states;
}

EntropyStats stats_of(const std::vector<DocVariational>& states) {
  std::vector<std::vector<double>> gammas;
  for (const auto& s : states) gammas.push_back(s.gamma);
  return entropy_stats(gammas);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(Command& c, std::ostream& out, const Logger& log, const std::string& format) {
  Stopwatch clock;
  RunManifest m = start_manifest(c, "train");
  std::vector<std::string> dropped;
  const Corpus corpus = load_corpus(c, &dropped);
  for (const auto& id : dropped) log.warn("document '" + id + "' is empty after filtering; dropped");
  corpus.validate(true);
  m.timings["load"] = clock.lap();
  log.info("corpus: D=" + std::to_string(corpus.num_docs()) +
           " V=" + std::to_string(corpus.vocab_size()) +
           " tokens=" + std::to_string(corpus.num_tokens()));

  FitHooks hooks;
  hooks.after_mstep = [&](std::size_t it, const ModelParams&) {
    log.debug("EM iteration " + std::to_string(it + 1));
  };
  const FitResult result = fit(corpus, c.train, hooks);
  m.timings["fit"] = clock.lap();

  const fs::path dir(c.shared.out);
  const fs::path model_path = dir / (format == "binary" ? "model.bin" : "model.json");
  if (format == "binary") {
    io::write_model_binary(model_path, result.model);
  } else {
    io::write_model_json(model_path, result.model);
  }
  io::write_vocabulary(dir / "vocab.tsv", corpus.vocabulary);
  io::write_encoded_corpus(dir / "corpus.tsv", corpus);
  io::write_gamma(dir / "gamma.tsv", corpus, result.per_doc);
  io::write_elbo_trace(dir / "elbo_trace.csv", result.elbo_trace);
  m.timings["write"] = clock.lap();

  m.outputs = {{"model", model_path.string()},
               {"vocab", (dir / "vocab.tsv").string()},
               {"corpus", (dir / "corpus.tsv").string()},
               {"gamma", (dir / "gamma.tsv").string()},
               {"elbo_trace", (dir / "elbo_trace.csv").string()}};
  const double elbo = result.elbo_trace.empty() ? 0.0 : result.elbo_trace.back().total;
  m.results = {{"iterations", std::to_string(result.iterations_run)},
               {"converged", result.converged ? "true" : "false"},
               {"final_elbo", io::format_double(elbo)},
               {"documents", std::to_string(corpus.num_docs())},
               {"vocab_size", std::to_string(corpus.vocab_size())},
               {"dropped_documents", std::to_string(dropped.size())}};
  finish_manifest(m, dir);
  if (!result.converged) log.warn("EM stopped at the iteration cap before converging");
  out << "iterations " << result.iterations_run << "\nfinal_elbo " << io::format_double(elbo)
      << '\n';
  return kExitOk;
}

int cmd_infer(Command& c, std::ostream& out, const Logger& log, const std::string& model_arg,
              bool lambda_given) {
  Stopwatch clock;
  RunManifest m = start_manifest(c, "infer");
  if (model_arg.empty()) throw ConfigError("--model is required");
  const fs::path model_path(model_arg);
  m.inputs["model"] = model_path.string();
  const ModelParams model = io::read_model(model_path);
  const fs::path vocab_path = default_vocab(c, model_path);
  const Vocabulary vocab = io::read_vocabulary(vocab_path);
  if (vocab.size() != model.vocab_size()) throw DataError("vocabulary size does not match model");
  m.inputs["vocab"] = vocab_path.string();
  m.corpus.tokenizer = tokenizer_near(model_path, log);

  TrainConfig config = c.train;
  config.num_topics = model.num_topics();
  config.zeta = model.zeta;
  if (!lambda_given) config.lambda = model.lambda;
  config.validate();
  m.train = config;

  std::vector<std::size_t> kept;
  const Corpus all = load_with_vocabulary(c, vocab, m.corpus.tokenizer);
  const Corpus corpus = without_empty(all, log, &kept);
  if (corpus.documents.empty()) throw DataError("no document has in-vocabulary tokens");
  m.timings["load"] = clock.lap();

  const std::vector<DocVariational> states = infer_all(corpus, model, config);
  m.timings["infer"] = clock.lap();

  const fs::path dir(c.shared.out);
  std::vector<std::string> ids;
  std::vector<double> entropies;
  {
    std::ostringstream theta;
    for (std::size_t d = 0; d < states.size(); ++d) {
      const auto t = normalize_gamma(states[d].gamma);
      theta << corpus.documents[d].id;
      for (double v : t) theta << '\t' << io::format_double(v);
      theta << '\n';
      ids.push_back(corpus.documents[d].id);
      entropies.push_back(std::min(entropy(t), std::log(static_cast<double>(t.size()))));
    }
    write_text(dir / "theta.tsv", theta.str());
  }
  io::write_gamma(dir / "gamma.tsv", corpus, states);
  io::write_entropy(dir / "entropy.csv", ids, entropies);
  m.outputs = {{"theta", (dir / "theta.tsv").string()},
               {"gamma", (dir / "gamma.tsv").string()},
               {"entropy", (dir / "entropy.csv").string()}};
  m.results = {{"documents", std::to_string(corpus.num_docs())},
               {"skipped_documents", std::to_string(all.num_docs() - corpus.num_docs())}};
  m.timings["write"] = clock.lap();
  finish_manifest(m, dir);
  out << "inferred " << corpus.num_docs() << " skipped " << all.num_docs() - corpus.num_docs()
      << '\n';
  return kExitOk;
}

int cmd_coherence(Command& c, std::ostream& out, const Logger& log, const std::string& model_arg,
                  std::size_t top_n, std::size_t window) {
  Stopwatch clock;
  RunManifest m = start_manifest(c, "coherence");
  if (model_arg.empty()) throw ConfigError("--model is required");
  const fs::path model_path(model_arg);
  m.inputs["model"] = model_path.string();
  const ModelParams model = io::read_model(model_path);
  const fs::path vocab_path = default_vocab(c, model_path);
  const Vocabulary vocab = io::read_vocabulary(vocab_path);
  if (vocab.size() != model.vocab_size()) throw DataError("vocabulary size does not match model");
  m.inputs["vocab"] = vocab_path.string();
  m.corpus.tokenizer = tokenizer_near(model_path, log);
  const Corpus reference = load_with_vocabulary(c, vocab, m.corpus.tokenizer);
  m.timings["load"] = clock.lap();

  const CoherenceReport report = coherence_report(model, reference, top_n, window);
  m.timings["score"] = clock.lap();
  const fs::path dir(c.shared.out);
  io::write_coherence(dir / "coherence.csv", report, vocab);
  m.outputs = {{"coherence", (dir / "coherence.csv").string()}};
  m.results = {{"mean_cv", io::format_double(report.mean_cv)},
               {"top_n", std::to_string(top_n)},
               {"window", std::to_string(window)}};
  finish_manifest(m, dir);
  out << "mean_cv " << io::format_double(report.mean_cv) << '\n';
  return kExitOk;
}

int cmd_entropy_stats(Command& c, std::ostream& out) {
  Stopwatch clock;
  RunManifest m = start_manifest(c, "entropy-stats");
  if (c.shared.input.empty()) throw ConfigError("--input (a gamma or theta table) is required");
  const io::GammaTable table = io::read_gamma(c.shared.input);
  const EntropyStats stats = entropy_stats(table.rows);
  const fs::path dir(c.shared.out);
  io::write_entropy(dir / "entropy.csv", table.ids, stats.entropies);
  io::write_entropy_stats(dir / "entropy_stats.json", stats);
  m.outputs = {{"entropy", (dir / "entropy.csv").string()},
               {"entropy_stats", (dir / "entropy_stats.json").string()}};
  m.results = {{"mean", io::format_double(stats.mean)},
               {"variance", io::format_double(stats.variance)}};
  m.timings["total"] = clock.lap();
  finish_manifest(m, dir);
  out << "mean_entropy " << io::format_double(stats.mean) << '\n';
  return kExitOk;
}

struct GridArgs {
  std::vector<std::size_t> ks{5, 10, 15, 20, 25, 30};
  std::vector<double> lambdas{25, 30, 35, 40, 45};
  std::size_t folds = 5;
  double train_fraction = 0.8;
  std::size_t top_n = kDefaultTopN;
  std::size_t window = kDefaultWindow;
  std::string reference = "validation";
};

int cmd_grid(Command& c, std::ostream& out, const Logger& log, const GridArgs& args) {
  Stopwatch clock;
  RunManifest m = start_manifest(c, "grid");
  std::vector<std::string> dropped;
  const Corpus corpus = load_corpus(c, &dropped);
  for (const auto& id : dropped) log.warn("document '" + id + "' is empty after filtering; dropped");
  corpus.validate(true);
  auto [train, test] = split_corpus(corpus, args.train_fraction, c.shared.seed);
  m.timings["load"] = clock.lap();

  GridConfig g;
  g.ks = args.ks;
  g.lambdas = args.lambdas;
  g.folds = args.folds;
  g.train = c.train;
  g.top_n = args.top_n;
  g.window_size = args.window;
  g.reference = args.reference == "training" ? CoherenceReference::kTrainingFolds
                                             : CoherenceReference::kValidationFold;
  g.fold_seed = c.shared.seed;
  const GridSelection sel = grid_select(train, g);
  m.timings["select"] = clock.lap();
  log.info("selected K=" + std::to_string(sel.best_k) +
           " lambda=" + io::format_double(sel.best_lambda));

  const fs::path dir(c.shared.out);
  io::write_grid(dir / "grid.csv", sel.table);
  io::write_vocabulary(dir / "vocab.tsv", train.vocabulary);
  m.outputs["grid"] = (dir / "grid.csv").string();
  m.outputs["vocab"] = (dir / "vocab.tsv").string();
  m.results["best_k"] = std::to_string(sel.best_k);
  m.results["best_lambda"] = io::format_double(sel.best_lambda);

  // Refit both models on the whole training part and score them on the test part.
  const Corpus scored = without_empty(test, log, nullptr);
  if (scored.documents.empty()) throw DataError("grid: test split has no usable documents");
  for (const auto& [name, lambda] : {std::pair<std::string, double>{"lda", 0.0},
                                     std::pair<std::string, double>{"cdtm", sel.best_lambda}}) {
    TrainConfig tc = c.train;
    tc.num_topics = sel.best_k;
    tc.lambda = lambda;
    const FitResult fitted = fit(train, tc);
    const CoherenceReport report = coherence_report(fitted.model, scored, args.top_n, args.window);
    const EntropyStats stats = stats_of(infer_all(scored, fitted.model, tc));
    io::write_model_json(dir / (name + "_model.json"), fitted.model);
    io::write_coherence(dir / (name + "_coherence.csv"), report, train.vocabulary);
    io::write_entropy_stats(dir / (name + "_entropy_stats.json"), stats);
    m.outputs[name + "_model"] = (dir / (name + "_model.json")).string();
    m.outputs[name + "_coherence"] = (dir / (name + "_coherence.csv")).string();
    m.outputs[name + "_entropy_stats"] = (dir / (name + "_entropy_stats.json")).string();
    m.results[name + "_test_cv"] = io::format_double(report.mean_cv);
    m.results[name + "_test_mean_entropy"] = io::format_double(stats.mean);
    out << name << "_test_cv " << io::format_double(report.mean_cv) << '\n'
        << name << "_test_mean_entropy " << io::format_double(stats.mean) << '\n';
  }
  m.timings["refit"] = clock.lap();
  finish_manifest(m, dir);
  out << "best_k " << sel.best_k << "\nbest_lambda " << io::format_double(sel.best_lambda)
      << '\n';
  return kExitOk;
}

int cmd_split(Command& c, std::ostream& out, const Logger& log, double train_fraction) {
  Stopwatch clock;
  RunManifest m = start_manifest(c, "split");
  std::vector<std::string> dropped;
  const Corpus corpus = load_corpus(c, &dropped);
  for (const auto& id : dropped) log.warn("document '" + id + "' is empty after filtering; dropped");
  auto [train, test] = split_corpus(corpus, train_fraction, c.shared.seed);
  const fs::path dir(c.shared.out);
  io::write_vocabulary(dir / "vocab.tsv", train.vocabulary);
  io::write_encoded_corpus(dir / "train.tsv", train);
  io::write_encoded_corpus(dir / "test.tsv", test);
  m.outputs = {{"vocab", (dir / "vocab.tsv").string()},
               {"train", (dir / "train.tsv").string()},
               {"test", (dir / "test.tsv").string()}};
  m.results = {{"train_documents", std::to_string(train.num_docs())},
               {"test_documents", std::to_string(test.num_docs())}};
  m.timings["total"] = clock.lap();
  finish_manifest(m, dir);
  out << "train " << train.num_docs() << "\ntest " << test.num_docs() << '\n';
  return kExitOk;
}

// `train --from-manifest PATH` seeds the option defaults, so it is read
// before the command line is parsed.
std::optional<RunManifest> manifest_for_rerun(const std::vector<std::string>& args) {
  if (args.empty() || args.front() != "train") return std::nullopt;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    std::string path;
    if (a == "--from-manifest" && i + 1 < args.size()) path = args[i + 1];
    if (a.rfind("--from-manifest=", 0) == 0) path = a.substr(16);
    if (!path.empty()) return manifest_from_json(read_text(path));
  }
  return std::nullopt;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
  const json j = {{"command", m.command},
                  {"tool_version", m.tool_version},
                  {"seed", m.seed},
                  {"threads", m.threads},
                  {"train", train_to_json(m.train)},
                  {"corpus", corpus_to_json(m.corpus)},
                  {"inputs", m.inputs},
                  {"outputs", m.outputs},
                  {"timings", m.timings},
                  {"results", m.results}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    j.at("command").get_to(m.command);
    j.at("tool_version").get_to(m.tool_version);
    j.at("seed").get_to(m.seed);
    j.at("threads").get_to(m.threads);
    m.train = train_from_json(j.at("train"));
    m.corpus = corpus_from_json(j.at("corpus"));
    j.at("inputs").get_to(m.inputs);
    j.at("outputs").get_to(m.outputs);
    j.at("timings").get_to(m.timings);
    j.at("results").get_to(m.results);
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err, level_from_env());

  CLI::App app{"Concentrated document topic model: entropy-penalized LDA", "cdtm"};
  app.set_version_flag("--version", std::string(CDTM_VERSION));
  app.require_subcommand(1);
  app.footer("Environment: CDTM_LOG=quiet|error|warn|info|debug (default warn).\n"
             "Exit codes: 0 ok, 2 bad flags/config/input, 1 numerical or other failure.");

  Command train{app.add_subcommand("train", "Fit a model by penalized variational EM")};
  std::string format = "json";
  std::string from_manifest;
  std::optional<RunManifest> base;
  try {
    base = manifest_for_rerun(args);
  } catch (const std::exception& e) {
    log.error(e.what());
    return kExitUsage;
  }
  if (base) {
    train.train = base->train;
    train.corpus = base->corpus;
    train.shared.seed = base->seed;
    train.shared.threads = base->threads;
    train.reduction = reduction_name(base->train.reduction);
    const auto model = base->outputs.find("model");
    if (model != base->outputs.end() && fs::path(model->second).extension() == ".bin") {
      format = "binary";
    }
  }
  add_shared(train);
  train.app->add_option("--from-manifest", from_manifest,
                        "Start from a previous train manifest (config, seed, inputs); "
                        "explicit flags still win");
  add_encoded(train);
  add_corpus_options(train);
  add_train_options(train);
  train.app->add_option("--format", format, "Model file format: json or binary")
      ->check(CLI::IsMember({"json", "binary"}))
      ->capture_default_str();

  Command infer{app.add_subcommand(
      "infer",
      "Infer topic proportions for documents with frozen topics. The model's lambda is "
      "used unless --lambda is given")};
  std::string infer_model;
  add_shared(infer);
  add_encoded(infer);
  add_train_options(infer);
  infer.app->add_option("--model", infer_model, "Model file, json or binary (required)");

  Command coherence{app.add_subcommand("coherence", "C_V coherence of a model's topics")};
  std::string coherence_model;
  std::size_t top_n = kDefaultTopN;
  std::size_t window = kDefaultWindow;
  add_shared(coherence);
  add_encoded(coherence);
  coherence.app->add_option("--model", coherence_model, "Model file (required)");
  coherence.app->add_option("--top-n", top_n, "Words per topic")->capture_default_str();
  coherence.app->add_option("--window", window, "Sliding window size")->capture_default_str();

  Command estats{app.add_subcommand("entropy-stats",
                                    "Entropy summary of document-topic distributions")};
  add_shared(estats);

  Command grid{app.add_subcommand(
      "grid",
      "Split, select K by perplexity and lambda by C_V, then refit and score on the test "
      "part. Perplexity bounds exclude the penalty term")};
  GridArgs grid_args;
  add_shared(grid);
  add_encoded(grid);
  add_corpus_options(grid);
  add_train_options(grid);
  grid.app->add_option("--ks", grid_args.ks, "Candidate topic counts")
      ->delimiter(',')
      ->capture_default_str();
  grid.app->add_option("--lambdas", grid_args.lambdas, "Candidate penalty weights")
      ->delimiter(',')
      ->capture_default_str();
  grid.app->add_option("--folds", grid_args.folds)->capture_default_str();
  grid.app->add_option("--train-fraction", grid_args.train_fraction)->capture_default_str();
  grid.app->add_option("--top-n", grid_args.top_n)->capture_default_str();
  grid.app->add_option("--window", grid_args.window)->capture_default_str();
  grid.app->add_option("--reference", grid_args.reference,
                       "C_V reference during selection: validation or training")
      ->check(CLI::IsMember({"validation", "training"}))
      ->capture_default_str();

  Command split{app.add_subcommand("split", "Random train/test split of a corpus")};
  double split_fraction = 0.8;
  add_shared(split);
  add_encoded(split);
  add_corpus_options(split);
  split.app->add_option("--train-fraction", split_fraction)->capture_default_str();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    log.error(e.what());
    return kExitUsage;
  }

  try {
    if (train.app->parsed()) {
      if (base && train.shared.input.empty() && train.shared.encoded.empty()) {
        auto get = [&](const char* key) {
          const auto it = base->inputs.find(key);
          return it == base->inputs.end() ? std::string() : it->second;
        };
        train.shared.input = get("input");
        train.shared.encoded = get("encoded");
        if (train.shared.vocab.empty()) train.shared.vocab = get("vocab");
      }
      finalize(train);
      train.train.validate();
      return cmd_train(train, out, log, format);
    }
    if (infer.app->parsed()) {
      finalize(infer);
      return cmd_infer(infer, out, log, infer_model, infer.app->count("--lambda") > 0);
    }
    if (coherence.app->parsed()) {
      finalize(coherence);
      return cmd_coherence(coherence, out, log, coherence_model, top_n, window);
    }
    if (estats.app->parsed()) {
      finalize(estats);
      return cmd_entropy_stats(estats, out);
    }
    if (grid.app->parsed()) {
      finalize(grid);
      grid.train.validate();
      return cmd_grid(grid, out, log, grid_args);
    }
    if (split.app->parsed()) {
      finalize(split);
      return cmd_split(split, out, log, split_fraction);
    }
  } catch (const ConfigError& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace cdtm::cli
