#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "accjoint/analysis.hpp"
#include "accjoint/design.hpp"
#include "accjoint/errors.hpp"
#include "accjoint/io.hpp"
#include "accjoint/sampler.hpp"
#include "accjoint/simstudy.hpp"
#include "accjoint/svg.hpp"

namespace fs = std::filesystem;
using namespace accjoint;

namespace {

constexpr std::uint64_t kPredictRole = 0xC001;

void emit_error(const std::string& code, const std::string& message) {
  const nlohmann::json j{{"error", {{"code", code}, {"message", message}}}};
  std::cerr << j.dump() << std::endl;
}

std::optional<std::uint64_t> env_seed() {
  const char* env = std::getenv("ACCJOINT_SEED");
  if (env == nullptr) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string text(env);
    const std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("E_CONFIG_INVALID", "ACCJOINT_SEED must be an unsigned integer, got '" +
                                              std::string(env) + "'");
  }
}

std::uint64_t effective_seed(const std::optional<std::uint64_t>& cli_seed,
                             std::uint64_t config_seed) {
  if (cli_seed) return *cli_seed;
  if (const auto env = env_seed()) return *env;
  return config_seed;
}

std::string abs_path(const std::string& p) {
  return fs::absolute(fs::path(p)).lexically_normal().string();
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("E_IO", "cannot create output directory '" + out + "'");
}

// ---- table writers ----

CsvTable group_means_table(const std::vector<GroupMeanRow>& rows) {
  CsvTable t;
  t.header = {"param", "task", "mean", "sd"};
  for (const auto& r : rows)
    t.rows.push_back({r.param, r.task, format_double(r.mean), format_double(r.sd)});
  return t;
}

CsvTable correlations_table(const CorrelationSummary& cs) {
  CsvTable t;
  t.header = {"param_row", "param_col", "mean", "sd", "reliable"};
  const int d = static_cast<int>(cs.param_names.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      t.rows.push_back({cs.param_names[i], cs.param_names[j], format_double(cs.mean(i, j)),
                        format_double(cs.sd(i, j)), cs.reliable(i, j) ? "1" : "0"});
  return t;
}

CsvTable subject_points_table(const std::vector<SubjectPointRow>& rows) {
  CsvTable t;
  t.header = {"subject", "param", "log_mean", "natural_mean"};
  for (const auto& r : rows)
    t.rows.push_back(
        {r.subject, r.param, format_double(r.log_mean), format_double(r.natural_mean)});
  return t;
}

CsvTable precision_table(const PrecisionCompare& pc) {
  CsvTable t;
  t.header = {"subject", "param", "task", "sd_joint", "sd_independent"};
  for (const auto& r : pc.rows)
    t.rows.push_back({r.subject, r.param, r.task, format_double(r.sd_joint),
                      format_double(r.sd_independent)});
  return t;
}

CsvTable recovery_table(const std::vector<RecoveryElement>& elements) {
  CsvTable t;
  t.header = {"element", "generating", "post_mean", "lo95", "hi95",
              "covers",  "excludes_zero", "between"};
  for (const auto& el : elements)
    t.rows.push_back({el.param_row + ":" + el.param_col, format_double(el.generating),
                      format_double(el.post_mean), format_double(el.lo95),
                      format_double(el.hi95), el.covers ? "1" : "0",
                      el.excludes_zero ? "1" : "0", el.between ? "1" : "0"});
  return t;
}

CsvTable true_alpha_table(const GeneratedData& g, const std::vector<std::string>& params) {
  CsvTable t;
  t.header = {"subject", "param", "alpha"};
  for (std::size_t s = 0; s < g.subject_ids.size(); ++s)
    for (std::size_t p = 0; p < params.size(); ++p)
      t.rows.push_back({g.subject_ids[s], params[p],
                        format_double(g.true_alpha(static_cast<int>(s), static_cast<int>(p)))});
  return t;
}

CsvTable predictive_table(const std::vector<PredictiveTrialSet>& sets) {
  CsvTable t;
  t.header = {"draw", "subject", "task", "cell", "response", "rt"};
  for (const auto& set : sets)
    for (const auto& trial : set.trials)
      t.rows.push_back({std::to_string(set.draw_iter), trial.subject, trial.task, trial.cell,
                        std::to_string(trial.response), format_double(trial.rt)});
  return t;
}

void write_summaries(const std::string& out, const PosteriorChain& chain, bool heatmap) {
  std::vector<GroupMeanRow> means;
  const auto labels = chain.block_labels;
  {
    // Rebuild the table from the chain's own coordinate labels.
    const auto recs = chain.records_for(Stage::kSampling);
    if (recs.empty()) throw InvalidInput("chain has no sampling-stage draws");
    for (int dcoord = 0; dcoord < chain.dim(); ++dcoord) {
      std::vector<double> values;
      values.reserve(recs.size());
      for (const auto* rec : recs) values.push_back(std::exp(rec->mu[dcoord]));
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double sd = 0.0;
      if (values.size() > 1) {
        for (double v : values) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / static_cast<double>(values.size() - 1));
      }
      means.push_back({chain.param_names[dcoord], labels[dcoord], mean, sd});
    }
  }
  write_csv((fs::path(out) / "group_means.csv").string(), group_means_table(means));
  const CorrelationSummary cs = correlation_summary(chain);
  write_csv((fs::path(out) / "correlations.csv").string(), correlations_table(cs));
  write_csv((fs::path(out) / "subject_points.csv").string(),
            subject_points_table(subject_effect_points(chain)));
  if (heatmap) atomic_write((fs::path(out) / "heatmap.svg").string(), emit_heatmap(cs));
}

// ---- subcommand arguments ----

struct FitArgs {
  std::string data, model, config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

struct DesignArgs {
  std::string design, out;
  std::string version;  // recover only
};

struct ChainArgs {
  std::string chain, out;
  bool heatmap = false;
  int draws = 0;
};

int cmd_fit(const FitArgs& a) {
  const std::string data_text = read_file(a.data, "E_DATA_NOT_FOUND");
  const std::string model_text = read_file(a.model, "E_MODEL_NOT_FOUND");
  const std::string config_text = read_file(a.config, "E_CONFIG_NOT_FOUND");

  const std::vector<TrialRecord> trials = parse_trials(data_text);
  const ModelSpec spec = ModelSpec::from_json(parse_json(model_text, "model '" + a.model + "'"));
  FitConfig fc = FitConfig::from_json(parse_json(config_text, "config '" + a.config + "'"));
  fc.sampler.seed = effective_seed(a.seed, fc.sampler.seed);
  if (a.workers) fc.sampler.workers = *a.workers;
  fc.sampler.check();

  PosteriorChain chain = run_chain(trials, spec, fc.sampler);
  ensure_out_dir(a.out);
  ChainMeta meta;
  meta.model_path = abs_path(a.model);
  meta.data_path = abs_path(a.data);
  meta.model_hash = fnv1a64_hex(model_text);
  meta.data_hash = fnv1a64_hex(data_text);
  meta.config_hash = fnv1a64_hex(config_text);
  chain.model_hash = meta.model_hash;
  chain.data_hash = meta.data_hash;
  write_chain(a.out, chain, meta);
  write_summaries(a.out, chain, fc.heatmap);

  if (fc.predictive_draws > 0) {
    RngStream rng = RngStream::derive(fc.sampler.seed, kPredictRole);
    const auto sets =
        posterior_predictive(chain, spec, design_from_data(trials), fc.predictive_draws, rng);
    write_csv((fs::path(a.out) / "predictive_trials.csv").string(), predictive_table(sets));
  }
  if (!fc.reference_chains.empty()) {
    std::vector<PosteriorChain> refs;
    for (const auto& path : fc.reference_chains) refs.push_back(read_chain(path));
    write_csv((fs::path(a.out) / "precision_compare.csv").string(),
              precision_table(precision_compare(chain, refs)));
  }
  return 0;
}

int cmd_simulate(const DesignArgs& a) {
  SimStudyConfig sc = SimStudyConfig::load(a.design);
  sc.design.seed = effective_seed(std::nullopt, sc.design.seed);
  SimDesign design = sc.design;
  design.generator = build_generator(design.version, sc.design.generator, design.target_r,
                                     sc.model.block_labels());
  const GeneratedData g = generate_dataset(design, sc.model, sc.cell_plan);
  ensure_out_dir(a.out);
  write_trials_csv((fs::path(a.out) / "trials.csv").string(), g.trials);
  write_csv((fs::path(a.out) / "true_alphas.csv").string(),
            true_alpha_table(g, sc.model.vector_order));
  return 0;
}

int cmd_recover(const DesignArgs& a) {
  SimStudyConfig sc = SimStudyConfig::load(a.design);
  const std::string design_text = read_file(a.design, "E_DESIGN_NOT_FOUND");
  if (const auto seed = env_seed()) {
    sc.design.seed = *seed;
    sc.sampler.seed = *seed;
  }
  SimDesign design = sc.design;
  design.version = version_from_name(a.version);
  design.generator = build_generator(design.version, sc.design.generator, design.target_r,
                                     sc.model.block_labels());

  const GeneratedData g = generate_dataset(design, sc.model, sc.cell_plan);
  PosteriorChain chain = run_chain(g.trials, sc.model, sc.sampler);

  ensure_out_dir(a.out);
  write_trials_csv((fs::path(a.out) / "trials.csv").string(), g.trials);
  write_csv((fs::path(a.out) / "true_alphas.csv").string(),
            true_alpha_table(g, sc.model.vector_order));
  ChainMeta meta;
  meta.model_path = sc.model_path;
  meta.data_path = (fs::path(a.out) / "trials.csv").string();
  meta.model_hash = fnv1a64_hex(read_file(sc.model_path, "E_MODEL_NOT_FOUND"));
  meta.data_hash = fnv1a64_hex(read_file(meta.data_path, "E_DATA_NOT_FOUND"));
  meta.config_hash = fnv1a64_hex(design_text);
  chain.model_hash = meta.model_hash;
  chain.data_hash = meta.data_hash;
  write_chain(a.out, chain, meta);

  const auto elements = score_recovery(chain, design);
  write_csv((fs::path(a.out) / "recovery_report.csv").string(), recovery_table(elements));
  atomic_write((fs::path(a.out) / "recovery_plot.svg").string(), emit_recovery_plot(elements));
  return 0;
}

int cmd_summarize(const ChainArgs& a) {
  const PosteriorChain chain = read_chain(a.chain);
  ensure_out_dir(a.out);
  write_summaries(a.out, chain, a.heatmap);
  return 0;
}

int cmd_predict(const ChainArgs& a) {
  ChainMeta meta;
  const PosteriorChain chain = read_chain(a.chain, &meta);
  const ModelSpec spec = ModelSpec::load(meta.model_path);
  const std::vector<TrialRecord> trials = read_trials_csv(meta.data_path);
  const std::uint64_t seed = effective_seed(std::nullopt, chain.config.seed);
  RngStream rng = RngStream::derive(seed, kPredictRole);
  const auto sets = posterior_predictive(chain, spec, design_from_data(trials), a.draws, rng);
  ensure_out_dir(a.out);
  write_csv((fs::path(a.out) / "predictive_trials.csv").string(), predictive_table(sets));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint hierarchical evidence-accumulation model fitting"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit the hierarchical model to a trial table");
  fit->add_option("--data", fit_args.data, "trial csv")->required();
  fit->add_option("--model", fit_args.model, "model json")->required();
  fit->add_option("--config", fit_args.config, "sampler/analysis config json")->required();
  fit->add_option("--out", fit_args.out, "output directory")->required();
  fit->add_option("--seed", fit_args.seed, "seed override");
  fit->add_option("--workers", fit_args.workers, "worker thread override");

  DesignArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "generate data from a simulation design");
  simulate->add_option("--design", sim_args.design, "simulation design json")->required();
  simulate->add_option("--out", sim_args.out, "output directory")->required();

  DesignArgs rec_args;
  auto* recover = app.add_subcommand("recover", "simulate, refit, and score recovery");
  recover->add_option("--design", rec_args.design, "simulation design json")->required();
  recover->add_option("--version", rec_args.version, "generator version")
      ->required()
      ->check(CLI::IsMember({"matched", "zero_between", "uniform_r"}));
  recover->add_option("--out", rec_args.out, "output directory")->required();

  ChainArgs sum_args;
  auto* summarize = app.add_subcommand("summarize", "summary tables from a stored chain");
  summarize->add_option("--chain", sum_args.chain, "chain ndjson")->required();
  summarize->add_option("--out", sum_args.out, "output directory")->required();
  summarize->add_flag("--heatmap", sum_args.heatmap, "emit correlation heatmap svg");

  ChainArgs pred_args;
  auto* predict = app.add_subcommand("predict", "posterior predictive simulation");
  predict->add_option("--chain", pred_args.chain, "chain ndjson")->required();
  predict->add_option("--draws", pred_args.draws, "number of posterior draws")->required();
  predict->add_option("--out", pred_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_args);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (recover->parsed()) return cmd_recover(rec_args);
    if (summarize->parsed()) return cmd_summarize(sum_args);
    if (predict->parsed()) return cmd_predict(pred_args);
    emit_error("E_CLI", "no subcommand given");
    return 1;
  } catch (const NumericalError& e) {
    emit_error(e.code(), e.what());
    return 3;
  } catch (const Error& e) {
    emit_error(e.code(), e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    emit_error("E_BAD_JSON", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("E_INTERNAL", e.what());
    return 3;
  }
}
