#include "cdtm/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cdtm/error.hpp"

namespace cdtm::io {
namespace {

using nlohmann::json;

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open: " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, const fs::path& where) {
  T v{};
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError("malformed number '" + s + "' in " + where.string());
  }
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

static_assert(std::endian::native == std::endian::little,
              "binary model I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const fs::path& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError("truncated binary model: " + where.string());
  }
  return v;
}

ModelParams checked(ModelParams model, const fs::path& where) {
  try {
    model.validate();
  } catch (const DataError& e) {
    throw DataError(where.string() + ": " + e.what());
  }
  return model;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::vector<RawDocument> read_raw_documents(const fs::path& path) {
  std::vector<RawDocument> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto in = open_in(f, std::ios::in | std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      docs.push_back({f.filename().string(), ss.str()});
    }
  } else {
    auto in = open_in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      strip_cr(line);
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      docs.push_back({std::to_string(n), line});
    }
  }
  if (docs.empty()) throw DataError("no documents found in " + path.string());
  return docs;
}

void write_vocabulary(const fs::path& path, const Vocabulary& vocab) {
  auto out = open_out(path);
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    const auto id = static_cast<WordId>(j);
    out << j << '\t' << vocab.term(id) << '\t' << vocab.document_frequency(id) << '\n';
  }
}

Vocabulary read_vocabulary(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) throw DataError("malformed vocabulary line in " + path.string());
    if (parse_number<std::size_t>(f[0], path) != terms.size()) {
      throw DataError("vocabulary ids must be consecutive from 0 in " + path.string());
    }
    terms.push_back(f[1]);
    freqs.push_back(parse_number<std::uint32_t>(f[2], path));
  }
  return Vocabulary(std::move(terms), std::move(freqs));
}

void write_encoded_corpus(const fs::path& path, const Corpus& corpus) {
  auto out = open_out(path);
  for (const auto& d : corpus.documents) {
    out << d.id << '\t' << d.tokens.size() << '\t';
    for (std::size_t n = 0; n < d.tokens.size(); ++n) {
      if (n) out << ' ';
      out << d.tokens[n];
    }
    out << '\n';
  }
}

Corpus read_encoded_corpus(const fs::path& path, Vocabulary vocab) {
  auto in = open_in(path);
  Corpus corpus;
  corpus.vocabulary = std::move(vocab);
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) throw DataError("malformed corpus line in " + path.string());
    Document doc{f[0], {}};
    const auto n = parse_number<std::size_t>(f[1], path);
    std::istringstream ws(f[2]);
    std::string tok;
    while (ws >> tok) doc.tokens.push_back(parse_number<WordId>(tok, path));
    if (doc.tokens.size() != n) throw DataError("token count mismatch for '" + doc.id + "'");
    corpus.documents.push_back(std::move(doc));
  }
  corpus.validate(false);
  return corpus;
}

void write_model_json(const fs::path& path, const ModelParams& model) {
  json j;
  j["version"] = kModelFormatVersion;
  j["K"] = model.num_topics();
  j["V"] = model.vocab_size();
  j["zeta"] = model.zeta;
  j["lambda"] = model.lambda;
  json rows = json::array();
  for (std::size_t i = 0; i < model.num_topics(); ++i) {
    const auto r = model.eta.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["eta"] = std::move(rows);
  auto out = open_out(path);
  out << j.dump() << '\n';
}

void write_model_binary(const fs::path& path, const ModelParams& model) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kBinaryMagic, 8);
  put<std::uint64_t>(out, model.num_topics());
  put<std::uint64_t>(out, model.vocab_size());
  put<double>(out, model.lambda);
  for (double z : model.zeta) put<double>(out, z);
  for (double v : model.eta.data()) put<double>(out, v);
}

ModelParams read_model(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  ModelParams model;
  if (in.gcount() == 8 && std::memcmp(magic, kBinaryMagic, 8) == 0) {
    const auto k = get<std::uint64_t>(in, path);
    const auto v = get<std::uint64_t>(in, path);
    if (k == 0 || v == 0 || k > (1u << 20) || v > (1ull << 32)) {
      throw DataError("implausible model dimensions in " + path.string());
    }
    model.lambda = get<double>(in, path);
    model.zeta.resize(k);
    for (auto& z : model.zeta) z = get<double>(in, path);
    model.eta = Matrix(k, v);
    for (auto& x : model.eta.data()) x = get<double>(in, path);
    return checked(std::move(model), path);
  }

  in.clear();
  in.seekg(0);
  json j;
  try {
    in >> j;
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw DataError("unsupported model version in " + path.string());
    }
    const auto k = j.at("K").get<std::size_t>();
    const auto v = j.at("V").get<std::size_t>();
    model.zeta = j.at("zeta").get<std::vector<double>>();
    model.lambda = j.at("lambda").get<double>();
    const auto& rows = j.at("eta");
    if (rows.size() != k || model.zeta.size() != k) throw DataError("model K mismatch");
    model.eta = Matrix(k, v);
    for (std::size_t i = 0; i < k; ++i) {
      const auto r = rows[i].get<std::vector<double>>();
      if (r.size() != v) throw DataError("model V mismatch");
      std::copy(r.begin(), r.end(), model.eta.row(i).begin());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed model file " + path.string() + ": " + e.what());
  }
  return checked(std::move(model), path);
}

void write_gamma(const fs::path& path, const Corpus& corpus,
                 const std::vector<DocVariational>& per_doc) {
  auto out = open_out(path);
  for (std::size_t d = 0; d < per_doc.size(); ++d) {
    out << corpus.documents[d].id;
    for (double g : per_doc[d].gamma) out << '\t' << format_double(g);
    out << '\n';
  }
}

GammaTable read_gamma(const fs::path& path) {
  auto in = open_in(path);
  GammaTable t;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() < 3) throw DataError("gamma row needs an id and at least two values");
    t.ids.push_back(f[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < f.size(); ++i) row.push_back(parse_number<double>(f[i], path));
    if (!t.rows.empty() && row.size() != t.rows.front().size()) {
      throw DataError("inconsistent K in " + path.string());
    }
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw DataError("no rows in " + path.string());
  return t;
}

void write_elbo_trace(const fs::path& path, const std::vector<ElboBreakdown>& trace) {
  auto out = open_out(path);
  out << "iteration,ll_terms,q_entropy,penalty,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& e = trace[i];
    out << i + 1 << ',' << format_double(e.log_likelihood_terms) << ','
        << format_double(e.entropy_of_q) << ',' << format_double(e.penalty_term) << ','
        << format_double(e.total) << '\n';
  }
}

void write_coherence(const fs::path& path, const CoherenceReport& report, const Vocabulary& vocab) {
  auto out = open_out(path);
  out << "topic_id,top_words,cv_score\n";
  for (std::size_t i = 0; i < report.topics.size(); ++i) {
    out << report.topics[i].topic_id << ',';
    const auto& words = report.topics[i].words;
    for (std::size_t n = 0; n < words.size(); ++n) {
      if (n) out << '|';
      out << vocab.term(words[n]);
    }
    out << ',' << format_double(report.per_topic[i]) << '\n';
  }
  out << "mean,," << format_double(report.mean_cv) << '\n';
}

void write_entropy(const fs::path& path, const std::vector<std::string>& ids,
                   const std::vector<double>& entropies) {
  auto out = open_out(path);
  out << "doc_id,entropy\n";
  for (std::size_t d = 0; d < entropies.size(); ++d) {
    out << ids[d] << ',' << format_double(entropies[d]) << '\n';
  }
}

void write_entropy_stats(const fs::path& path, const EntropyStats& stats) {
  const Histogram hist = entropy_histogram(stats.entropies, stats.num_topics);
  json j;
  j["K"] = stats.num_topics;
  j["documents"] = stats.entropies.size();
  j["mean"] = stats.mean;
  j["variance"] = stats.variance;
  j["skewness"] = stats.skewness;
  j["excess_kurtosis"] = stats.excess_kurtosis;
  std::vector<double> edges;
  for (std::size_t b = 0; b <= hist.counts.size(); ++b) {
    edges.push_back(std::min(static_cast<double>(b) * hist.bin_width, hist.upper));
  }
  j["histogram"] = {{"bin_width", hist.bin_width},
                    {"range", {0.0, hist.upper}},
                    {"edges", edges},
                    {"counts", hist.counts}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_grid(const fs::path& path, const std::vector<GridRow>& rows) {
  auto out = open_out(path);
  out << "K,lambda,fold,metric_name,value\n";
  for (const auto& r : rows) {
    out << r.k << ',' << format_double(r.lambda) << ',' << r.fold << ',' << r.metric << ','
        << format_double(r.value) << '\n';
  }
}

}  // namespace cdtm::io
