#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cdtm/corpus.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("cdtm_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::vector<double> dirichlet_draw(std::mt19937_64& rng, const std::vector<double>& alpha) {
  std::vector<double> x(alpha.size());
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(alpha[i], 1.0);
    x[i] = g(rng);
    s += x[i];
  }
  for (double& v : x) v /= s;
  return x;
}

/// Running mean and standard error.
struct MeanSe {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double se() const { return std::sqrt(m2 / (n - 1.0) / n); }
};

inline double rel_err(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

/// Corpus with word names "a", "b", ... given as token strings per document.
inline cdtm::Corpus letters_corpus(const std::vector<std::string>& docs, std::size_t vocab_size) {
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < vocab_size; ++i) terms.push_back(std::string(1, static_cast<char>('a' + i)));
  cdtm::Corpus c{cdtm::Vocabulary(terms), {}};
  for (std::size_t d = 0; d < docs.size(); ++d) {
    cdtm::Document doc{"d" + std::to_string(d), {}};
    for (char ch : docs[d]) doc.tokens.push_back(static_cast<cdtm::WordId>(ch - 'a'));
    c.documents.push_back(doc);
  }
  return c;
}

}  // namespace testing
