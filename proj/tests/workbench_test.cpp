#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "accjoint/analysis.hpp"
#include "accjoint/errors.hpp"
#include "accjoint/io.hpp"
#include "accjoint/svg.hpp"
#include "test_helpers.hpp"

using namespace accjoint;
namespace fs = std::filesystem;

namespace {

std::string error_code_of(const std::string& stderr_text) {
  const auto j = nlohmann::json::parse(stderr_text);
  return j.at("error").at("code").get<std::string>();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// One shared tiny fit used by the summarize/predict/determinism cases; the
// run is cheap but not free, so do it once per process.
const std::string& tiny_fit_dir() {
  static std::string dir;
  if (dir.empty()) {
    dir = testutil::scratch_dir("wb_fit_base");
    const auto r = testutil::run_cli("fit --data " + testutil::fixture_path("tiny_trials.csv") +
                                         " --model " + testutil::fixture_path("tiny_model.json") +
                                         " --config " + testutil::fixture_path("tiny_fit.json") +
                                         " --out " + dir,
                                     "wb_fit_base");
    REQUIRE(r.status == 0);
  }
  return dir;
}

CorrelationSummary demo_summary() {
  CorrelationSummary cs;
  cs.param_names = {"b_1", "v_1"};
  cs.block_labels = {"t1", "t2"};
  cs.mean = Eigen::MatrixXd(2, 2);
  cs.mean << 1.0, 0.97, 0.97, 1.0;
  cs.sd = Eigen::MatrixXd::Constant(2, 2, 0.01);
  cs.reliable = reliability_flags(cs.mean, cs.sd);
  return cs;
}

}  // namespace

TEST_CASE("hash function matches the published fnv1a-64 vectors") {
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
  CHECK(fnv1a64_hex("abc") != fnv1a64_hex("abd"));
  CHECK(fnv1a64_hex(std::string("\0\0", 2)) != fnv1a64_hex(std::string("\0", 1)));
}

TEST_CASE("csv writer quotes awkward fields and parses back unchanged") {
  CsvTable t;
  t.header = {"name", "note"};
  t.rows = {{"plain", "with,comma"},
            {"quote\"inside", "line\nbreak"},
            {"", "  padded  "}};
  const std::string text = to_csv(t);
  const CsvTable back = parse_csv(text);
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(back.rows[i] == t.rows[i]);

  const std::string dir = testutil::scratch_dir("wb_csv");
  write_csv(dir + "/t.csv", t);
  const CsvTable from_disk = read_csv(dir + "/t.csv");
  CHECK(from_disk.header == t.header);
  CHECK(from_disk.rows == t.rows);
}

TEST_CASE("trial tables require the canonical header and finite fields") {
  CHECK_THROWS_WITH_AS(parse_trials("subject,task,rt\na,b,0.3\n"),
                       doctest::Contains("header"), IoError);
  try {
    parse_trials("subject,task,cell,response,rt\na,b,c,0,oops\n");
    FAIL("expected a csv error");
  } catch (const IoError& e) {
    CHECK(e.code() == "E_BAD_CSV");
  }
  CHECK_THROWS_AS(parse_trials("subject,task,cell,response,rt\na,b,c,0,inf\n"), IoError);
  CHECK_THROWS_AS(parse_trials("subject,task,cell,response,rt\na,b,c,zero,0.5\n"), IoError);

  const auto trials = read_trials_csv(testutil::fixture_path("tiny_trials.csv"));
  REQUIRE(trials.size() == 90);
  const std::string dir = testutil::scratch_dir("wb_trials");
  write_trials_csv(dir + "/copy.csv", trials);
  const auto back = read_trials_csv(dir + "/copy.csv");
  REQUIRE(back.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(back[i].subject == trials[i].subject);
    CHECK(back[i].task == trials[i].task);
    CHECK(back[i].cell == trials[i].cell);
    CHECK(back[i].response == trials[i].response);
    CHECK(back[i].rt == trials[i].rt);
  }
}

TEST_CASE("sampler configuration json round-trips and rejects unknown keys") {
  SamplerConfig cfg;
  cfg.particles = {30, 40, 50};
  cfg.draws = {60, 70, 80};
  cfg.w_prior = 0.7;
  cfg.w_local = 0.3;
  cfg.local_scale = 0.25;
  cfg.seed = 987654321;
  cfg.thin = 3;
  cfg.workers = 2;
  cfg.nu = 4.0;
  cfg.aux_scale = Eigen::VectorXd::Constant(3, 2.5);
  cfg.adapt_min_unique = 12;
  cfg.proposal_ridge = 1e-5;

  const SamplerConfig back = sampler_config_from_json(sampler_config_to_json(cfg));
  CHECK(back.particles.burn_in == cfg.particles.burn_in);
  CHECK(back.particles.adaptation == cfg.particles.adaptation);
  CHECK(back.particles.sampling == cfg.particles.sampling);
  CHECK(back.draws.burn_in == cfg.draws.burn_in);
  CHECK(back.draws.sampling == cfg.draws.sampling);
  CHECK(back.w_prior == cfg.w_prior);
  CHECK(back.w_local == cfg.w_local);
  CHECK(back.local_scale == cfg.local_scale);
  CHECK(back.seed == cfg.seed);
  CHECK(back.thin == cfg.thin);
  CHECK(back.workers == cfg.workers);
  CHECK(back.nu == cfg.nu);
  CHECK(back.aux_scale == cfg.aux_scale);
  CHECK(back.adapt_min_unique == cfg.adapt_min_unique);
  CHECK(back.proposal_ridge == cfg.proposal_ridge);

  // Partial objects fall back to defaults instead of failing.
  const SamplerConfig defaults = sampler_config_from_json(nlohmann::json::object());
  CHECK(defaults.particles.burn_in == SamplerConfig{}.particles.burn_in);
  CHECK(defaults.seed == SamplerConfig{}.seed);

  try {
    sampler_config_from_json(nlohmann::json{{"particels", 3}});
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.code() == "E_CONFIG_INVALID");
    CHECK(std::string(e.what()).find("particels") != std::string::npos);
  }
}

TEST_CASE("numeric formatting emits the shortest exact decimal form") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, 12345.0, -2.5e300, 0.0, -0.0625}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("file io reports the caller's code and writes atomically") {
  try {
    read_file("/nonexistent/definitely_missing.txt", "E_DATA_NOT_FOUND");
    FAIL("expected an io error");
  } catch (const IoError& e) {
    CHECK(e.code() == "E_DATA_NOT_FOUND");
  }

  const std::string dir = testutil::scratch_dir("wb_atomic");
  const std::string path = dir + "/note.txt";
  atomic_write(path, "first");
  atomic_write(path, "second");
  CHECK(testutil::slurp(path) == "second");
  // No temporary siblings left behind.
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("heatmap encodes sign, magnitude band, and reliability border") {
  CorrelationSummary cs = demo_summary();
  const std::string svg = emit_heatmap(cs);
  CHECK(svg.find("<svg") == 0);
  // A strong reliable positive entry: darkest green with a black border.
  CHECK(svg.find("fill=\"rgb(0,109,44)\"") != std::string::npos);
  CHECK(svg.find("stroke=\"black\"") != std::string::npos);
  // Output is a pure function of the summary.
  CHECK(emit_heatmap(cs) == svg);

  // Negative entries shade toward the red endpoint instead.
  cs.mean(0, 1) = cs.mean(1, 0) = -0.97;
  const std::string neg = emit_heatmap(cs);
  CHECK(neg.find("fill=\"rgb(178,24,43)\"") != std::string::npos);

  // A zero matrix draws only white cells and no reliability borders even
  // when the sd is tiny: a confidently-zero entry is not highlighted.
  cs.mean.setZero();
  cs.reliable = reliability_flags(cs.mean, cs.sd);
  const std::string blank = emit_heatmap(cs);
  CHECK(blank.find("fill=\"rgb(255,255,255)\"") != std::string::npos);
  CHECK(blank.find("stroke=\"black\"") == std::string::npos);
  CHECK(blank.find("rgb(0,109,44)") == std::string::npos);
  CHECK(blank.find("rgb(178,24,43)") == std::string::npos);

  // Block selection restricts the grid; an unknown block selects nothing.
  const std::string one_block = emit_heatmap(demo_summary(), {"t1", "t2"});
  CHECK(one_block.find(">b_1<") != std::string::npos);
  CHECK(one_block.find(">v_1<") != std::string::npos);
  CHECK_THROWS_AS(emit_heatmap(demo_summary(), {"t9", ""}), InvalidInput);
}

TEST_CASE("cli rejects unknown flags and absent subcommands") {
  CHECK(testutil::run_cli("fit --nope", "wb_badflag").status == 1);
  CHECK(testutil::run_cli("", "wb_nosub").status != 0);
  CHECK(testutil::run_cli("frobnicate", "wb_badsub").status == 1);
}

TEST_CASE("cli reports missing or malformed inputs as coded json errors") {
  const std::string dir = testutil::scratch_dir("wb_errors");
  const std::string model = testutil::fixture_path("tiny_model.json");
  const std::string data = testutil::fixture_path("tiny_trials.csv");
  const std::string config = testutil::fixture_path("tiny_fit.json");

  auto r = testutil::run_cli(
      "fit --data /no/such.csv --model " + model + " --config " + config + " --out " + dir,
      "wb_err_data");
  CHECK(r.status == 2);
  CHECK(error_code_of(r.err) == "E_DATA_NOT_FOUND");

  r = testutil::run_cli(
      "fit --data " + data + " --model /no/such.json --config " + config + " --out " + dir,
      "wb_err_model");
  CHECK(r.status == 2);
  CHECK(error_code_of(r.err) == "E_MODEL_NOT_FOUND");

  write_text(dir + "/broken.json", "{ not json");
  r = testutil::run_cli(
      "fit --data " + data + " --model " + dir + "/broken.json --config " + config + " --out " +
          dir,
      "wb_err_json");
  CHECK(r.status == 2);
  CHECK(error_code_of(r.err) == "E_BAD_JSON");

  write_text(dir + "/bad.csv", "subject,task\nx,y\n");
  r = testutil::run_cli(
      "fit --data " + dir + "/bad.csv --model " + model + " --config " + config + " --out " + dir,
      "wb_err_csv");
  CHECK(r.status == 2);
  CHECK(error_code_of(r.err) == "E_BAD_CSV");

  write_text(dir + "/extra.json", "{\"particles\": {\"burn_in\": 1}, \"mystery\": 4}");
  r = testutil::run_cli(
      "fit --data " + data + " --model " + model + " --config " + dir + "/extra.json --out " +
          dir,
      "wb_err_cfg");
  CHECK(r.status == 2);
  CHECK(error_code_of(r.err) == "E_CONFIG_INVALID");

  r = testutil::run_cli("summarize --chain /no/such.ndjson --out " + dir, "wb_err_chain");
  CHECK(r.status == 2);
  CHECK(error_code_of(r.err) == "E_CHAIN_NOT_FOUND");
}

TEST_CASE("fit writes the chain, sidecar metadata, tables, and heatmap") {
  const std::string& dir = tiny_fit_dir();
  for (const char* name : {"chain.ndjson", "meta.json", "group_means.csv", "correlations.csv",
                           "subject_points.csv", "heatmap.svg"}) {
    CHECK_MESSAGE(fs::exists(fs::path(dir) / name), name);
  }

  const auto meta = nlohmann::json::parse(testutil::slurp(dir + "/meta.json"));
  CHECK(meta.at("model_hash") ==
        fnv1a64_hex(testutil::slurp(testutil::fixture_path("tiny_model.json"))));
  CHECK(meta.at("data_hash") ==
        fnv1a64_hex(testutil::slurp(testutil::fixture_path("tiny_trials.csv"))));
  CHECK(meta.at("config_hash") ==
        fnv1a64_hex(testutil::slurp(testutil::fixture_path("tiny_fit.json"))));

  ChainMeta cm;
  const PosteriorChain chain = read_chain(dir + "/chain.ndjson", &cm);
  CHECK(chain.dim() == 4);
  CHECK(chain.n_subjects() == 3);
  CHECK(chain.records_for(Stage::kSampling).size() == 100);
  CHECK(cm.data_hash == meta.at("data_hash").get<std::string>());

  const CsvTable means = read_csv(dir + "/group_means.csv");
  CHECK(means.header == std::vector<std::string>{"param", "task", "mean", "sd"});
  REQUIRE(means.rows.size() == 4);
  for (const auto& row : means.rows) {
    CHECK(row[1] == "lexical");
    CHECK(std::stod(row[2]) > 0.0);  // natural-scale means
    CHECK(std::stod(row[3]) >= 0.0);
  }

  const CsvTable corr = read_csv(dir + "/correlations.csv");
  CHECK(corr.header ==
        std::vector<std::string>{"param_row", "param_col", "mean", "sd", "reliable"});
  CHECK(corr.rows.size() == 16);

  const CsvTable pts = read_csv(dir + "/subject_points.csv");
  CHECK(pts.rows.size() == 12);
  CHECK(testutil::slurp(dir + "/heatmap.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("identical seeds reproduce the chain byte for byte") {
  const std::string base = testutil::slurp(tiny_fit_dir() + "/chain.ndjson");
  REQUIRE(!base.empty());

  const std::string again = testutil::scratch_dir("wb_fit_again");
  auto r = testutil::run_cli("fit --data " + testutil::fixture_path("tiny_trials.csv") +
                                 " --model " + testutil::fixture_path("tiny_model.json") +
                                 " --config " + testutil::fixture_path("tiny_fit.json") +
                                 " --out " + again,
                             "wb_fit_again");
  REQUIRE(r.status == 0);
  CHECK(testutil::slurp(again + "/chain.ndjson") == base);
  CHECK(testutil::slurp(again + "/group_means.csv") ==
        testutil::slurp(tiny_fit_dir() + "/group_means.csv"));

  const std::string other = testutil::scratch_dir("wb_fit_seed99");
  r = testutil::run_cli("fit --data " + testutil::fixture_path("tiny_trials.csv") + " --model " +
                            testutil::fixture_path("tiny_model.json") + " --config " +
                            testutil::fixture_path("tiny_fit.json") + " --seed 99 --out " + other,
                        "wb_fit_seed99");
  REQUIRE(r.status == 0);
  CHECK(testutil::slurp(other + "/chain.ndjson") != base);
}

TEST_CASE("seed precedence is cli flag over environment over config") {
  const std::string args = "fit --data " + testutil::fixture_path("tiny_trials.csv") +
                           " --model " + testutil::fixture_path("tiny_model.json") +
                           " --config " + testutil::fixture_path("tiny_fit.json") + " --out ";

  const std::string from_flag = testutil::scratch_dir("wb_seed_flag");
  REQUIRE(testutil::run_cli(args + from_flag + " --seed 123", "wb_seed_flag").status == 0);

  const std::string from_env = testutil::scratch_dir("wb_seed_env");
  REQUIRE(testutil::run_cli(args + from_env, "wb_seed_env", "ACCJOINT_SEED=123").status == 0);
  CHECK(testutil::slurp(from_env + "/chain.ndjson") ==
        testutil::slurp(from_flag + "/chain.ndjson"));

  // With both present the flag wins.
  const std::string both = testutil::scratch_dir("wb_seed_both");
  REQUIRE(testutil::run_cli(args + both + " --seed 123", "wb_seed_both", "ACCJOINT_SEED=7")
              .status == 0);
  CHECK(testutil::slurp(both + "/chain.ndjson") == testutil::slurp(from_flag + "/chain.ndjson"));

  const std::string env7 = testutil::scratch_dir("wb_seed_env7");
  REQUIRE(testutil::run_cli(args + env7, "wb_seed_env7", "ACCJOINT_SEED=7").status == 0);
  CHECK(testutil::slurp(env7 + "/chain.ndjson") != testutil::slurp(from_flag + "/chain.ndjson"));

  const auto bad = testutil::run_cli(args + env7, "wb_seed_bad", "ACCJOINT_SEED=notanumber");
  CHECK(bad.status == 2);
  CHECK(error_code_of(bad.err) == "E_CONFIG_INVALID");
}

TEST_CASE("summarize reproduces the fit tables from the stored chain") {
  const std::string dir = testutil::scratch_dir("wb_summarize");
  const auto r = testutil::run_cli(
      "summarize --chain " + tiny_fit_dir() + "/chain.ndjson --out " + dir + " --heatmap",
      "wb_summarize");
  REQUIRE(r.status == 0);
  for (const char* name :
       {"group_means.csv", "correlations.csv", "subject_points.csv", "heatmap.svg"}) {
    CHECK_MESSAGE(testutil::slurp(dir + "/" + name) ==
                      testutil::slurp(tiny_fit_dir() + "/" + name),
                  name);
  }

  const std::string plain = testutil::scratch_dir("wb_summarize_plain");
  REQUIRE(testutil::run_cli("summarize --chain " + tiny_fit_dir() + "/chain.ndjson --out " + plain,
                            "wb_summarize_plain")
              .status == 0);
  CHECK(!fs::exists(fs::path(plain) / "heatmap.svg"));
}

TEST_CASE("stored chains are validated when read back") {
  const std::string dir = testutil::scratch_dir("wb_chain_check");

  // Chain without its sidecar.
  fs::copy_file(tiny_fit_dir() + "/chain.ndjson", dir + "/chain.ndjson");
  try {
    read_chain(dir + "/chain.ndjson");
    FAIL("expected an io error");
  } catch (const IoError& e) {
    CHECK(e.code() == "E_META_NOT_FOUND");
  }

  fs::copy_file(tiny_fit_dir() + "/meta.json", dir + "/meta.json");
  CHECK_NOTHROW(read_chain(dir + "/chain.ndjson"));

  // A line of garbage is a json problem; a well-formed record with the wrong
  // shape is a chain problem.
  const std::string good = testutil::slurp(dir + "/chain.ndjson");
  write_text(dir + "/chain.ndjson", good + "not json at all\n");
  try {
    read_chain(dir + "/chain.ndjson");
    FAIL("expected an io error");
  } catch (const IoError& e) {
    CHECK(e.code() == "E_BAD_JSON");
  }

  const std::size_t first_eol = good.find('\n');
  const std::string first_line = good.substr(0, first_eol);
  nlohmann::json rec = nlohmann::json::parse(first_line);
  rec["mu"] = {0.0};  // wrong dimension
  rec["iter"] = 1000000;
  write_text(dir + "/chain.ndjson", good + rec.dump() + "\n");
  try {
    read_chain(dir + "/chain.ndjson");
    FAIL("expected an io error");
  } catch (const IoError& e) {
    CHECK(e.code() == "E_BAD_CHAIN");
  }

  write_text(dir + "/chain.ndjson", "");
  try {
    read_chain(dir + "/chain.ndjson");
    FAIL("expected an io error");
  } catch (const IoError& e) {
    CHECK(e.code() == "E_BAD_CHAIN");
  }
}

TEST_CASE("predict draws a deterministic posterior-predictive table") {
  const std::string dir = testutil::scratch_dir("wb_predict");
  auto r = testutil::run_cli(
      "predict --chain " + tiny_fit_dir() + "/chain.ndjson --draws 2 --out " + dir, "wb_predict");
  REQUIRE(r.status == 0);

  const CsvTable t = read_csv(dir + "/predictive_trials.csv");
  CHECK(t.header == std::vector<std::string>{"draw", "subject", "task", "cell", "response", "rt"});
  // Each draw replays the observed design: 90 observed trials, twice.
  CHECK(t.rows.size() == 180);
  std::set<std::string> draws, subjects;
  for (const auto& row : t.rows) {
    draws.insert(row[0]);
    subjects.insert(row[1]);
    CHECK(row[2] == "lexical");
    CHECK(row[3] == "word");
    CHECK(std::stod(row[5]) > 0.0);
  }
  CHECK(draws.size() == 2);
  CHECK(subjects == std::set<std::string>{"s1", "s2", "s3"});

  const std::string again = testutil::scratch_dir("wb_predict_again");
  r = testutil::run_cli(
      "predict --chain " + tiny_fit_dir() + "/chain.ndjson --draws 2 --out " + again,
      "wb_predict_again");
  REQUIRE(r.status == 0);
  CHECK(testutil::slurp(again + "/predictive_trials.csv") ==
        testutil::slurp(dir + "/predictive_trials.csv"));
}

TEST_CASE("simulate emits the generated trials and the true effects") {
  const std::string dir = testutil::scratch_dir("wb_simulate");
  auto r = testutil::run_cli(
      "simulate --design " + testutil::fixture_path("tiny_simstudy.json") + " --out " + dir,
      "wb_simulate");
  REQUIRE(r.status == 0);

  const auto trials = read_trials_csv(dir + "/trials.csv");
  CHECK(trials.size() == 90);  // 3 subjects x 30 trials in the single task
  const CsvTable alphas = read_csv(dir + "/true_alphas.csv");
  CHECK(alphas.header == std::vector<std::string>{"subject", "param", "alpha"});
  CHECK(alphas.rows.size() == 12);
  std::set<std::string> subjects;
  for (const auto& row : alphas.rows) subjects.insert(row[0]);
  CHECK(subjects == std::set<std::string>{"s1", "s2", "s3"});

  const std::string again = testutil::scratch_dir("wb_simulate_again");
  r = testutil::run_cli(
      "simulate --design " + testutil::fixture_path("tiny_simstudy.json") + " --out " + again,
      "wb_simulate_again");
  REQUIRE(r.status == 0);
  CHECK(testutil::slurp(again + "/trials.csv") == testutil::slurp(dir + "/trials.csv"));
  CHECK(testutil::slurp(again + "/true_alphas.csv") == testutil::slurp(dir + "/true_alphas.csv"));
}

TEST_CASE("recover scores every covariance element and plots the result") {
  const std::string dir = testutil::scratch_dir("wb_recover");
  nlohmann::json design = nlohmann::json::parse(
      testutil::slurp(testutil::fixture_path("tiny_simstudy.json")));
  design["model"] = testutil::fixture_path("tiny_model.json");
  design["trials_per_task"] = 20;
  design["seed"] = 11;
  design["sampler"] = {{"particles", {{"burn_in", 20}, {"adaptation", 20}, {"sampling", 10}}},
                       {"draws", {{"burn_in", 10}, {"adaptation", 10}, {"sampling", 20}}},
                       {"seed", 11}};
  write_text(dir + "/design.json", design.dump(1));

  const auto r = testutil::run_cli(
      "recover --design " + dir + "/design.json --version matched --out " + dir, "wb_recover");
  REQUIRE_MESSAGE(r.status == 0, r.err);
  for (const char* name : {"trials.csv", "true_alphas.csv", "chain.ndjson", "meta.json",
                           "recovery_report.csv", "recovery_plot.svg"}) {
    CHECK_MESSAGE(fs::exists(fs::path(dir) / name), name);
  }

  const CsvTable report = read_csv(dir + "/recovery_report.csv");
  CHECK(report.header == std::vector<std::string>{"element", "generating", "post_mean", "lo95",
                                                  "hi95", "covers", "excludes_zero", "between"});
  CHECK(report.rows.size() == 10);  // upper triangle of a 4x4 covariance
  for (const auto& row : report.rows) {
    CHECK(std::stod(row[3]) <= std::stod(row[4]));
    CHECK((row[5] == "0" || row[5] == "1"));
    CHECK((row[6] == "0" || row[6] == "1"));
    CHECK(row[7] == "0");  // single-task model: no between-task elements
  }
  CHECK(testutil::slurp(dir + "/recovery_plot.svg").rfind("<svg", 0) == 0);

  const auto bad = testutil::run_cli(
      "recover --design " + dir + "/design.json --version diagonal --out " + dir,
      "wb_recover_bad");
  CHECK(bad.status == 1);
}
