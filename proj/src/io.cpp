#include "accjoint/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>

#include "accjoint/errors.hpp"

namespace fs = std::filesystem;

namespace accjoint {

namespace {

const std::set<std::string> kSamplerKeys = {
    "particles", "draws",    "mixture_weights", "local_scale",      "seed",
    "thin",      "workers",  "nu",              "aux_scale",        "adapt_min_unique",
    "proposal_ridge"};

const std::set<std::string> kStageKeys = {"burn_in", "adaptation", "sampling"};

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("E_CONFIG_INVALID", "unknown key '" + key + "' in " + where);
  }
}

StageCounts stage_counts_from_json(const nlohmann::json& j, const std::string& where,
                                   StageCounts defaults) {
  if (!j.is_object()) throw ConfigError("E_CONFIG_INVALID", where + " must be an object");
  reject_unknown_keys(j, kStageKeys, where);
  StageCounts out = defaults;
  if (j.contains("burn_in")) out.burn_in = j.at("burn_in").get<int>();
  if (j.contains("adaptation")) out.adaptation = j.at("adaptation").get<int>();
  if (j.contains("sampling")) out.sampling = j.at("sampling").get<int>();
  return out;
}

nlohmann::json stage_counts_to_json(const StageCounts& c) {
  return {{"burn_in", c.burn_in}, {"adaptation", c.adaptation}, {"sampling", c.sampling}};
}

double parse_double_field(const std::string& text, const char* field, std::size_t line_no) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw IoError("E_BAD_CSV", std::string("line ") + std::to_string(line_no) + ": field '" +
                                   field + "' is not a number: '" + text + "'");
  return value;
}

long parse_long_field(const std::string& text, const char* field, std::size_t line_no) {
  long value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw IoError("E_BAD_CSV", std::string("line ") + std::to_string(line_no) + ": field '" +
                                   field + "' is not an integer: '" + text + "'");
  return value;
}

bool needs_quoting(const std::string& field) {
  return field.find_first_of(",\"\n\r") != std::string::npos;
}

void append_field(std::string& out, const std::string& field) {
  if (!needs_quoting(field)) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

Eigen::VectorXd json_to_vector(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw IoError("E_BAD_CHAIN", what + " must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string read_file(const std::string& path, const std::string& missing_code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(missing_code, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("E_IO", "read failed for '" + path + "'");
  return buf.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("E_IO", "cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("E_IO", "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("E_IO", "cannot rename '" + tmp.string() + "' to '" + target.string() +
                                    "': " + ec.message());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("E_BAD_JSON", what + ": " + e.what());
  }
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    append_field(out, table.header[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw InvalidInput("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      append_field(out, row[i]);
    }
    out += '\n';
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> current;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_started = true;
        break;
      case ',':
        current.push_back(std::move(field));
        field.clear();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_started || !field.empty() || !current.empty()) {
          current.push_back(std::move(field));
          field.clear();
          records.push_back(std::move(current));
          current.clear();
          row_started = false;
        }
        break;
      default:
        field += c;
        row_started = true;
        break;
    }
  }
  if (in_quotes) throw IoError("E_BAD_CSV", "unterminated quoted field");
  if (row_started || !field.empty() || !current.empty()) {
    current.push_back(std::move(field));
    records.push_back(std::move(current));
  }
  if (records.empty()) throw IoError("E_BAD_CSV", "empty csv document");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw IoError("E_BAD_CSV", "line " + std::to_string(r + 1) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, got " +
                                     std::to_string(records[r].size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  atomic_write(path, to_csv(table));
}

CsvTable read_csv(const std::string& path) {
  return parse_csv(read_file(path, "E_DATA_NOT_FOUND"));
}

std::vector<TrialRecord> parse_trials(const std::string& csv_text) {
  const CsvTable table = parse_csv(csv_text);
  const std::vector<std::string> expected = {"subject", "task", "cell", "response", "rt"};
  if (table.header != expected)
    throw IoError("E_BAD_CSV", "trial table header must be subject,task,cell,response,rt");
  std::vector<TrialRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    TrialRecord t;
    t.subject = row[0];
    t.task = row[1];
    t.cell = row[2];
    t.response = static_cast<int>(parse_long_field(row[3], "response", r + 2));
    t.rt = parse_double_field(row[4], "rt", r + 2);
    if (!std::isfinite(t.rt))
      throw IoError("E_BAD_CSV", "line " + std::to_string(r + 2) + ": rt must be finite");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TrialRecord> read_trials_csv(const std::string& path) {
  return parse_trials(read_file(path, "E_DATA_NOT_FOUND"));
}

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& trials) {
  CsvTable table;
  table.header = {"subject", "task", "cell", "response", "rt"};
  table.rows.reserve(trials.size());
  for (const auto& t : trials)
    table.rows.push_back({t.subject, t.task, t.cell, std::to_string(t.response),
                          format_double(t.rt)});
  write_csv(path, table);
}

nlohmann::json sampler_config_to_json(const SamplerConfig& cfg) {
  nlohmann::json j{{"particles", stage_counts_to_json(cfg.particles)},
                   {"draws", stage_counts_to_json(cfg.draws)},
                   {"mixture_weights", {cfg.w_prior, cfg.w_local}},
                   {"local_scale", cfg.local_scale},
                   {"seed", cfg.seed},
                   {"thin", cfg.thin},
                   {"workers", cfg.workers},
                   {"nu", cfg.nu},
                   {"adapt_min_unique", cfg.adapt_min_unique},
                   {"proposal_ridge", cfg.proposal_ridge}};
  if (cfg.aux_scale.size() > 0) j["aux_scale"] = vector_to_json(cfg.aux_scale);
  return j;
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw ConfigError("E_CONFIG_INVALID", "sampler configuration must be an object");
  reject_unknown_keys(j, kSamplerKeys, "sampler configuration");
  SamplerConfig cfg;
  if (j.contains("particles"))
    cfg.particles = stage_counts_from_json(j.at("particles"), "particles", cfg.particles);
  if (j.contains("draws")) cfg.draws = stage_counts_from_json(j.at("draws"), "draws", cfg.draws);
  if (j.contains("mixture_weights")) {
    const auto& w = j.at("mixture_weights");
    if (!w.is_array() || w.size() != 2)
      throw ConfigError("E_CONFIG_INVALID", "mixture_weights must be a 2-element array");
    cfg.w_prior = w[0].get<double>();
    cfg.w_local = w[1].get<double>();
  }
  if (j.contains("local_scale")) cfg.local_scale = j.at("local_scale").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("thin")) cfg.thin = j.at("thin").get<int>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
  if (j.contains("nu")) cfg.nu = j.at("nu").get<double>();
  if (j.contains("aux_scale")) {
    if (!j.at("aux_scale").is_array())
      throw ConfigError("E_CONFIG_INVALID", "aux_scale must be an array (one entry per parameter)");
    cfg.aux_scale = json_to_vector(j.at("aux_scale"), "aux_scale");
  }
  if (j.contains("adapt_min_unique")) cfg.adapt_min_unique = j.at("adapt_min_unique").get<int>();
  if (j.contains("proposal_ridge")) cfg.proposal_ridge = j.at("proposal_ridge").get<double>();
  cfg.check();
  return cfg;
}

std::string chain_to_ndjson(const PosteriorChain& chain) {
  std::string out;
  const int d = chain.dim();
  const int S = chain.n_subjects();
  for (const auto& rec : chain.records) {
    nlohmann::json j;
    j["iter"] = rec.iter;
    j["stage"] = stage_name(rec.stage);
    j["mu"] = vector_to_json(rec.mu);
    nlohmann::json sigma = nlohmann::json::array();
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) sigma.push_back(rec.sigma(i, k));
    j["sigma"] = std::move(sigma);
    j["a"] = vector_to_json(rec.aux);
    nlohmann::json alpha = nlohmann::json::array();
    for (int s = 0; s < S; ++s)
      for (int k = 0; k < d; ++k) alpha.push_back(rec.alpha(s, k));
    j["alpha"] = std::move(alpha);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_chain(const std::string& dir, const PosteriorChain& chain, const ChainMeta& meta) {
  const fs::path base(dir);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw IoError("E_IO", "cannot create output directory '" + dir + "'");

  atomic_write((base / "chain.ndjson").string(), chain_to_ndjson(chain));

  nlohmann::json j;
  j["block_labels"] = chain.block_labels;
  j["config"] = sampler_config_to_json(chain.config);
  j["config_hash"] = meta.config_hash;
  j["data_hash"] = meta.data_hash;
  j["data_path"] = meta.data_path;
  j["degenerate_updates"] = chain.degenerate_updates;
  j["model_hash"] = meta.model_hash;
  j["model_path"] = meta.model_path;
  j["subjects"] = chain.subject_ids;
  j["vector_order"] = chain.param_names;
  j["warnings"] = chain.warnings;
  atomic_write((base / "meta.json").string(), j.dump(2) + "\n");
}

PosteriorChain read_chain(const std::string& chain_path, ChainMeta* meta_out) {
  const std::string chain_text = read_file(chain_path, "E_CHAIN_NOT_FOUND");
  const fs::path meta_path = fs::path(chain_path).parent_path() / "meta.json";
  const nlohmann::json meta =
      parse_json(read_file(meta_path.string(), "E_META_NOT_FOUND"), "meta.json");

  PosteriorChain chain;
  try {
    chain.subject_ids = meta.at("subjects").get<std::vector<std::string>>();
    chain.param_names = meta.at("vector_order").get<std::vector<std::string>>();
    chain.block_labels = meta.at("block_labels").get<std::vector<std::string>>();
    chain.config = sampler_config_from_json(meta.at("config"));
    if (meta.contains("warnings"))
      chain.warnings = meta.at("warnings").get<std::vector<std::string>>();
    if (meta.contains("degenerate_updates"))
      chain.degenerate_updates = meta.at("degenerate_updates").get<std::int64_t>();
    chain.model_hash = meta.value("model_hash", "");
    chain.data_hash = meta.value("data_hash", "");
    if (meta_out != nullptr) {
      meta_out->model_path = meta.value("model_path", "");
      meta_out->data_path = meta.value("data_path", "");
      meta_out->model_hash = chain.model_hash;
      meta_out->data_hash = chain.data_hash;
      meta_out->config_hash = meta.value("config_hash", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("E_BAD_CHAIN", std::string("meta.json: ") + e.what());
  }

  const int d = chain.dim();
  const int S = chain.n_subjects();
  std::int64_t last_iter = std::numeric_limits<std::int64_t>::min();
  std::size_t pos = 0, line_no = 0;
  while (pos < chain_text.size()) {
    std::size_t eol = chain_text.find('\n', pos);
    if (eol == std::string::npos) eol = chain_text.size();
    const std::string line = chain_text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = parse_json(line, "chain line " + std::to_string(line_no));
    ChainRecord rec;
    try {
      rec.iter = j.at("iter").get<std::int64_t>();
      rec.stage = stage_from_name(j.at("stage").get<std::string>());
      rec.mu = json_to_vector(j.at("mu"), "mu");
      rec.aux = json_to_vector(j.at("a"), "a");
      const Eigen::VectorXd sigma_flat = json_to_vector(j.at("sigma"), "sigma");
      const Eigen::VectorXd alpha_flat = json_to_vector(j.at("alpha"), "alpha");
      if (rec.mu.size() != d || rec.aux.size() != d ||
          sigma_flat.size() != static_cast<long>(d) * d ||
          alpha_flat.size() != static_cast<long>(S) * d)
        throw IoError("E_BAD_CHAIN",
                      "chain line " + std::to_string(line_no) + ": dimension mismatch");
      rec.sigma.resize(d, d);
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) rec.sigma(i, k) = sigma_flat[i * d + k];
      rec.alpha.resize(S, d);
      for (int s = 0; s < S; ++s)
        for (int k = 0; k < d; ++k) rec.alpha(s, k) = alpha_flat[s * d + k];
    } catch (const nlohmann::json::exception& e) {
      throw IoError("E_BAD_CHAIN",
                    "chain line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.iter <= last_iter)
      throw IoError("E_BAD_CHAIN", "chain iterations must be strictly increasing");
    last_iter = rec.iter;
    chain.records.push_back(std::move(rec));
  }
  if (chain.records.empty()) throw IoError("E_BAD_CHAIN", "chain file holds no records");
  return chain;
}

FitConfig FitConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("E_CONFIG_INVALID", "fit configuration must be an object");
  FitConfig fc;
  nlohmann::json sampler = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "heatmap") {
      fc.heatmap = value.get<bool>();
    } else if (key == "predictive_draws") {
      fc.predictive_draws = value.get<int>();
    } else if (key == "reference_chains") {
      fc.reference_chains = value.get<std::vector<std::string>>();
    } else if (kSamplerKeys.count(key)) {
      sampler[key] = value;
    } else {
      throw ConfigError("E_CONFIG_INVALID", "unknown key '" + key + "' in fit configuration");
    }
  }
  fc.sampler = sampler_config_from_json(sampler);
  if (fc.predictive_draws < 0)
    throw ConfigError("E_CONFIG_INVALID", "predictive_draws must be >= 0");
  return fc;
}

SimStudyConfig SimStudyConfig::load(const std::string& path) {
  const nlohmann::json j =
      parse_json(read_file(path, "E_DESIGN_NOT_FOUND"), "simulation design '" + path + "'");
  if (!j.is_object())
    throw ConfigError("E_CONFIG_INVALID", "simulation design must be a JSON object");
  const std::set<std::string> allowed = {"model",      "subjects", "trials_per_task",
                                         "seed",       "version",  "target_r",
                                         "generator",  "cell_plan", "sampler"};
  reject_unknown_keys(j, allowed, "simulation design");

  SimStudyConfig sc;
  if (!j.contains("model") || !j.at("model").is_string())
    throw ConfigError("E_CONFIG_INVALID", "simulation design needs a 'model' path");
  fs::path model_path(j.at("model").get<std::string>());
  if (model_path.is_relative()) model_path = fs::path(path).parent_path() / model_path;
  sc.model_path = fs::absolute(model_path).lexically_normal().string();
  sc.model = ModelSpec::load(sc.model_path);
  const int d = sc.model.dim();

  sc.design.subjects = j.value("subjects", 2);
  sc.design.trials_per_task = j.value("trials_per_task", 1L);
  sc.design.seed = j.value("seed", static_cast<std::uint64_t>(1));
  sc.design.target_r = j.value("target_r", 0.8);
  if (j.contains("version"))
    sc.design.version = version_from_name(j.at("version").get<std::string>());

  if (!j.contains("generator") || !j.at("generator").is_object())
    throw ConfigError("E_CONFIG_INVALID", "simulation design needs a 'generator' object");
  const auto& gen = j.at("generator");
  reject_unknown_keys(gen, {"mu", "sigma"}, "generator");
  if (!gen.contains("mu") || !gen.contains("sigma"))
    throw ConfigError("E_CONFIG_INVALID", "generator needs 'mu' and 'sigma'");
  sc.design.generator = GroupState::init(d);
  sc.design.generator.mu = json_to_vector(gen.at("mu"), "generator mu");
  if (sc.design.generator.mu.size() != d)
    throw ConfigError("E_CONFIG_INVALID", "generator mu length does not match the model");
  const auto& sig = gen.at("sigma");
  if (!sig.is_array() || static_cast<int>(sig.size()) != d)
    throw ConfigError("E_CONFIG_INVALID", "generator sigma must be a " + std::to_string(d) + "x" +
                                              std::to_string(d) + " array of rows");
  sc.design.generator.sigma.resize(d, d);
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd row = json_to_vector(sig[i], "generator sigma row");
    if (row.size() != d)
      throw ConfigError("E_CONFIG_INVALID", "generator sigma row " + std::to_string(i) +
                                                " has wrong length");
    sc.design.generator.sigma.row(i) = row.transpose();
  }

  if (j.contains("cell_plan")) {
    if (!j.at("cell_plan").is_array())
      throw ConfigError("E_CONFIG_INVALID", "cell_plan must be an array");
    for (const auto& e : j.at("cell_plan")) {
      reject_unknown_keys(e, {"task", "cell", "n"}, "cell_plan entry");
      PlanEntry entry;
      entry.task = e.at("task").get<std::string>();
      entry.cell = e.at("cell").get<std::string>();
      entry.n = e.at("n").get<long>();
      sc.cell_plan.push_back(std::move(entry));
    }
  } else {
    sc.cell_plan = default_cell_plan(sc.model, sc.design.trials_per_task);
  }

  const nlohmann::json sampler_json =
      j.contains("sampler") ? j.at("sampler") : nlohmann::json::object();
  sc.sampler = sampler_config_from_json(sampler_json);
  if (!sampler_json.contains("seed")) sc.sampler.seed = sc.design.seed;
  sc.design.check();
  return sc;
}

}  // namespace accjoint
