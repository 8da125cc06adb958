#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/eval.hpp"
#include "cdtm/inference.hpp"
#include "cdtm/model.hpp"

namespace cdtm::io {

namespace fs = std::filesystem;

inline constexpr int kModelFormatVersion = 1;
inline constexpr char kBinaryMagic[9] = "CDTM0001";

/// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

// Raw text input: a directory of files (one document each, id = file name,
// sorted by name) or a single file with one document per line (id = line
// number starting at 1; blank lines skipped).
std::vector<RawDocument> read_raw_documents(const fs::path& path);

// Vocabulary TSV: word_id <TAB> term <TAB> document_frequency.
void write_vocabulary(const fs::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const fs::path& path);

// Encoded corpus: doc_id <TAB> N_d <TAB> w_1 w_2 ... w_Nd.
void write_encoded_corpus(const fs::path& path, const Corpus& corpus);
Corpus read_encoded_corpus(const fs::path& path, Vocabulary vocab);

// Model: JSON {version, K, V, zeta[], lambda, eta[][]} or the binary layout
// magic "CDTM0001", u64 K, u64 V, f64 lambda, f64 zeta[K], f64 eta[K*V]
// (row-major), all little-endian.
void write_model_json(const fs::path& path, const ModelParams& model);
void write_model_binary(const fs::path& path, const ModelParams& model);
/// Detects the format from the first bytes.
ModelParams read_model(const fs::path& path);

// gamma.tsv: doc_id <TAB> gamma_1 ... gamma_K.
void write_gamma(const fs::path& path, const Corpus& corpus,
                 const std::vector<DocVariational>& per_doc);
struct GammaTable {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};
GammaTable read_gamma(const fs::path& path);

// elbo_trace.csv: iteration,ll_terms,q_entropy,penalty,total.
void write_elbo_trace(const fs::path& path, const std::vector<ElboBreakdown>& trace);

// coherence.csv: topic_id,top_words,cv_score plus a final "mean" row.
void write_coherence(const fs::path& path, const CoherenceReport& report, const Vocabulary& vocab);

// entropy.csv: doc_id,entropy; entropy_stats.json with a 0.05-wide histogram.
void write_entropy(const fs::path& path, const std::vector<std::string>& ids,
                   const std::vector<double>& entropies);
void write_entropy_stats(const fs::path& path, const EntropyStats& stats);

// grid.csv: K,lambda,fold,metric_name,value.
void write_grid(const fs::path& path, const std::vector<GridRow>& rows);

}  // namespace cdtm::io
