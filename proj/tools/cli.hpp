#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cdtm/corpus.hpp"
#include "cdtm/model.hpp"

namespace cdtm::cli {

/// What a command ran with and what it produced; written as manifest.json
/// next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = OpenMP default
  TrainConfig train;
  CorpusConfig corpus;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, double> timings;  // seconds per phase
  std::map<std::string, std::string> results;

  bool operator==(const RunManifest&) const = default;
};

std::string manifest_to_json(const RunManifest& manifest);
/// Throws DataError on malformed input.
RunManifest manifest_from_json(const std::string& text);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // numerical or unexpected failure
inline constexpr int kExitUsage = 2;    // bad flags, config or input files

/// Entry point shared by the `cdtm` executable and the tests. `args` excludes
/// the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace cdtm::cli
