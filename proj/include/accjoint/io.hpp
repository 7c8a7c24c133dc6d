#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "accjoint/design.hpp"
#include "accjoint/sampler.hpp"
#include "accjoint/simstudy.hpp"

namespace accjoint {

// FNV-1a 64-bit hash, 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

// Reads a whole file; missing/unreadable file raises IoError with the given
// error code.
std::string read_file(const std::string& path, const std::string& missing_code);

// Writes to a temporary sibling and renames, so readers never observe a
// partial file.
void atomic_write(const std::string& path, const std::string& content);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// JSON parse with a stable error code and a source label in the message.
nlohmann::json parse_json(const std::string& text, const std::string& what);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::vector<TrialRecord> parse_trials(const std::string& csv_text);
std::vector<TrialRecord> read_trials_csv(const std::string& path);
void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& trials);

nlohmann::json sampler_config_to_json(const SamplerConfig& cfg);
SamplerConfig sampler_config_from_json(const nlohmann::json& j);  // rejects unknown keys

struct ChainMeta {
  std::string model_path;
  std::string data_path;
  std::string model_hash;
  std::string data_hash;
  std::string config_hash;
};

std::string chain_to_ndjson(const PosteriorChain& chain);

// Writes <dir>/chain.ndjson and <dir>/meta.json.
void write_chain(const std::string& dir, const PosteriorChain& chain, const ChainMeta& meta);

// Reads a chain file plus its sidecar meta.json from the same directory.
PosteriorChain read_chain(const std::string& chain_path, ChainMeta* meta_out = nullptr);

struct FitConfig {
  SamplerConfig sampler;
  bool heatmap = true;
  int predictive_draws = 0;
  std::vector<std::string> reference_chains;  // optional independent fits to compare against

  static FitConfig from_json(const nlohmann::json& j);
};

// Simulation-study description: a model reference plus generator settings and
// the sampler configuration used when refitting.
struct SimStudyConfig {
  std::string model_path;  // as resolved (absolute)
  ModelSpec model;
  SimDesign design;
  std::vector<PlanEntry> cell_plan;  // default even split when not given
  SamplerConfig sampler;

  static SimStudyConfig load(const std::string& path);
};

}  // namespace accjoint
