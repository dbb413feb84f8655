#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "skglass/harness.hpp"

namespace fs = std::filesystem;
using namespace skglass;
using namespace skglass::harness;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("skglass_harness_" + name);
  fs::remove_all(p);
  return p;
}

fs::path fixture(const std::string& name) { return fs::path(SKGLASS_FIXTURE_DIR) / name; }

ExperimentConfig scaling(std::vector<std::int64_t> ns, std::int64_t instances) {
  ExperimentConfig c;
  c.kind = ExperimentKind::scaling_study;
  c.n_list = std::move(ns);
  c.beta_list = {0.5, 2.0};
  c.instances = instances;
  c.seed = 11;
  return c;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SKGLASS_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---- config ----------------------------------------------------------------

TEST(Config, RoundTripsThroughCanonicalText) {
  ExperimentConfig c;
  c.kind = ExperimentKind::escape_study;
  c.n_list = {10, 20, 30};
  c.beta_list = {0.1, 1.0, 3.0, 1e-7};
  c.rho_list = {0.05};
  c.instances = 7;
  c.seed = 123456789;
  c.law = Law::rademacher;
  c.gamma = 0.3;
  c.delta = 0.05;
  c.rho = 0.1;
  c.budget = 4000;
  c.reps = 50;
  c.cap = 1 << 20;
  c.restarts = 9;
  c.mixing = true;
  c.output_dir = "out dir/\"quoted\"";
  const auto text = to_text(c);
  const auto back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_text(back), text);
}

TEST(Config, DefaultsFillMissingKeysAndIntegersWidenToReals) {
  const auto c = parse_config("kind = \"free_energy\"\nn_list = [8]\nbeta_list = [1, 0.5]\ngamma = 2\n");
  EXPECT_EQ(c.kind, ExperimentKind::free_energy);
  EXPECT_EQ(c.beta_list, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(c.gamma, 2.0);
  EXPECT_EQ(c.instances, 1);
  EXPECT_EQ(c.law, Law::gaussian);
}

TEST(Config, CommentsAndWhitespaceAreIgnored) {
  const auto c = parse_config("# study\n  kind = \"gapped_study\"   # trailing\n\nn_list = [ 8 ,\n 10 ]\n");
  EXPECT_EQ(c.n_list, (std::vector<std::int64_t>{8, 10}));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("kind = \"free_energy\"\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"free_energy\"\ninstances = 2\ninstances = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"nope\"\n"), ConfigError);
  EXPECT_THROW(parse_config("n_list = [8]\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"free_energy\"\ninstances = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"free_energy\"\nn_list = [8.0]\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"free_energy\"\nbeta_list = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"free_energy\"\nmixing = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"free_energy\"\nlaw = \"cauchy\"\n"), ConfigError);
}

TEST(Config, SyntaxErrorsReportTheLine) {
  try {
    parse_config("kind = \"free_energy\"\nn_list = [8\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
  }
}

TEST(Config, GatesAreCheckedAtValidation) {
  auto c = scaling({8, 21}, 1);
  EXPECT_THROW(validate(c), GateError);
  c = scaling({8, 13}, 1);
  EXPECT_NO_THROW(validate(c));
  c.mixing = true;
  EXPECT_THROW(validate(c), GateError);

  ExperimentConfig f;
  f.kind = ExperimentKind::free_energy;
  f.n_list = {26};
  f.beta_list = {1.0};
  EXPECT_THROW(validate(f), GateError);
  f.n_list = {25};
  EXPECT_NO_THROW(validate(f));

  ExperimentConfig b;
  b.kind = ExperimentKind::bottleneck_pipeline;
  b.n_list = {21};
  b.beta_list = {1.0};
  EXPECT_THROW(validate(b), GateError);
}

TEST(Config, ParameterErrorsAreConfigErrors) {
  auto c = scaling({8}, 1);
  c.beta_list.clear();
  EXPECT_THROW(validate(c), ConfigError);
  c = scaling({}, 1);
  EXPECT_THROW(validate(c), ConfigError);
  c = scaling({8}, 0);
  EXPECT_THROW(validate(c), ConfigError);
  c = scaling({8}, 1);
  c.beta_list = {-1.0};
  EXPECT_THROW(validate(c), ConfigError);

  ExperimentConfig e;
  e.kind = ExperimentKind::escape_study;
  e.n_list = {30};
  e.beta_list = {1.0};
  e.rho = 0.5;
  EXPECT_THROW(validate(e), ConfigError);
  e.rho = 0.01;  // rho N < 1
  EXPECT_THROW(validate(e), ConfigError);
  e.rho = 0.1;
  EXPECT_NO_THROW(validate(e));

  ExperimentConfig r;
  r.kind = ExperimentKind::restricted_norm_study;
  r.n_list = {100};
  EXPECT_THROW(validate(r), ConfigError);  // empty rho_list
  r.rho_list = {0.1};
  EXPECT_NO_THROW(validate(r));
}

TEST(Config, HashTracksContent) {
  const auto a = scaling({8, 10}, 2);
  auto b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.seed = 12;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, FixtureFileLoads) {
  const auto c = load_config(fixture("free_energy_small.toml").string());
  EXPECT_EQ(c.kind, ExperimentKind::free_energy);
  EXPECT_NO_THROW(validate(c));
  EXPECT_THROW(load_config(fixture("missing.toml").string()), ConfigError);
}

// ---- fit ---------------------------------------------------------------------

TEST(Fit, RecoversPlantedExponential) {
  std::vector<double> n, y;
  for (int k = 6; k <= 20; k += 2) {
    n.push_back(k);
    y.push_back(2.0 + 1.0 * k);
  }
  const auto f = fit_scaling(n, y);
  ASSERT_TRUE(f.preferred_alpha);
  EXPECT_EQ(*f.preferred_alpha, 1.0);
  EXPECT_GE(f.stretched.rss, 10.0 * f.exponential.rss);
  EXPECT_NEAR(f.exponential.a, 2.0, 1e-9);
  EXPECT_NEAR(f.exponential.b, 1.0, 1e-9);
}

TEST(Fit, RecoversPlantedStretchedExponential) {
  std::vector<double> n, y;
  for (int k = 6; k <= 20; k += 2) {
    n.push_back(k);
    y.push_back(2.0 + std::cbrt(static_cast<double>(k)));
  }
  const auto f = fit_scaling(n, y);
  ASSERT_TRUE(f.preferred_alpha);
  EXPECT_NEAR(*f.preferred_alpha, 1.0 / 3.0, 1e-15);
  EXPECT_GE(f.exponential.rss, 10.0 * f.stretched.rss);
  EXPECT_NEAR(f.stretched.b, 1.0, 1e-9);
}

TEST(Fit, ConstantInputHasNoWinner) {
  const auto f = fit_scaling({6, 8, 10, 12}, {3.0, 3.0, 3.0, 3.0});
  EXPECT_FALSE(f.preferred_alpha);
  EXPECT_EQ(f.verdict(), "no winner");
  EXPECT_NEAR(f.stretched.b, 0.0, 1e-12);
  EXPECT_NEAR(f.exponential.b, 0.0, 1e-12);
}

TEST(Fit, CloseResidualsHaveNoWinner) {
  // Alternating noise dominates both models equally well.
  const auto f = fit_scaling({6, 8, 10, 12, 14, 16}, {1.0, -1.0, 1.0, -1.0, 1.0, -1.0});
  EXPECT_LT(f.separation, kNoWinnerRatio);
  EXPECT_FALSE(f.preferred_alpha);
}

TEST(Fit, NeedsFourDistinctSizes) {
  EXPECT_THROW(fit_scaling({6, 6, 8, 10}, {1, 2, 3, 4}), ConfigError);
  EXPECT_THROW(fit_scaling({6, 8, 10}, {1, 2, 3}), ConfigError);
  EXPECT_NO_THROW(fit_scaling({6, 8, 10, 12}, {1, 2, 3, 5}));
}

TEST(Fit, UsesMediansOverInstances) {
  std::map<double, std::vector<double>> by_n{
      {6, {8.0, 100.0, 8.0}}, {8, {10.0}}, {10, {12.0, -50.0, 12.0}}, {12, {14.0, 14.0}}};
  const auto f = fit_medians(by_n);
  EXPECT_NEAR(f.exponential.b, 1.0, 1e-12);
  EXPECT_NEAR(f.exponential.a, 2.0, 1e-12);
}

// ---- record ------------------------------------------------------------------

namespace {

RunRecord sample_record() {
  RunRecord r;
  r.kind = "scaling_study";
  r.config_text = "kind = \"scaling_study\"\n";
  r.config_hash = "0123456789abcdef";
  r.columns = {{"n", ColumnType::integer}, {"x", ColumnType::real}, {"label", ColumnType::text}};
  r.rows = {{std::int64_t{8}, 0.1, std::string("plain")},
            {std::int64_t{10}, std::nan(""), std::string("has,comma \"q\"")},
            {std::int64_t{12}, -std::numeric_limits<double>::infinity(), std::monostate{}},
            {std::monostate{}, 1e-300, std::string("")}};
  r.tasks_done = r.tasks_total = 4;
  r.complete = true;
  r.summary = {{"k", {1.5, 2, "x"}}};
  return r;
}

}  // namespace

TEST(Record, JsonReloadReemitsIdenticalBytes) {
  const auto r = sample_record();
  const auto text = r.dump();
  const auto back = RunRecord::from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.dump(), text);
  EXPECT_EQ(back.csv(), r.csv());
}

TEST(Record, CsvQuotesAndMissingValues) {
  const auto csv = sample_record().csv();
  EXPECT_EQ(csv,
            "n,x,label\n"
            "8,0.1,plain\n"
            "10,nan,\"has,comma \"\"q\"\"\"\n"
            "12,-inf,\n"
            ",1e-300,\n");
}

TEST(Record, EmptyRecordIsHeaderOnly) {
  RunRecord r;
  r.columns = columns_for(ExperimentKind::free_energy);
  EXPECT_EQ(r.csv(), "n,instance,beta,quenched,annealed,difference\n");
}

TEST(Record, MalformedJsonIsFormatError) {
  EXPECT_THROW(RunRecord::from_json(nlohmann::json::parse("{\"version\": 1}")), FormatError);
  auto j = sample_record().to_json();
  j["rows"][0].push_back(1);
  EXPECT_THROW(RunRecord::from_json(j), FormatError);
  j = sample_record().to_json();
  j["rows"][0][0] = "eight";
  EXPECT_THROW(RunRecord::from_json(j), FormatError);
  EXPECT_THROW(RunRecord::load("/nonexistent/record.json"), FormatError);
}

TEST(Record, ColumnSchemaIsPinned) {
  // Golden headers; a change here needs a schema bump and a fixture update.
  std::ifstream in(fixture("headers.txt"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "schema " + std::to_string(kSchemaVersion));
  for (auto k : {ExperimentKind::scaling_study, ExperimentKind::free_energy, ExperimentKind::bottleneck_pipeline,
                 ExperimentKind::escape_study, ExperimentKind::restricted_norm_study, ExperimentKind::gapped_study}) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, to_string(k) + ": " + csv_header(columns_for(k)).substr(0, csv_header(columns_for(k)).size() - 1));
  }
}

// ---- svg / report ------------------------------------------------------------

TEST(Svg, RenderingIsDeterministicAndDropsUnplottablePoints) {
  Plot p{"t", "x", "y", true, {}};
  p.series.push_back({"a & b", {1, 2, 3, 4}, {10, -1, std::nan(""), 1000}, SeriesStyle::points});
  p.series.push_back({"line", {1, 4}, {10, 1000}, SeriesStyle::line});
  const auto svg = p.render();
  EXPECT_EQ(svg, p.render());
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>\n"), std::string::npos);
  EXPECT_NE(svg.find("a &amp; b"), std::string::npos);
  std::size_t circles = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  EXPECT_EQ(circles, 2u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
}

TEST(Svg, HistogramCountsEveryFiniteValue) {
  const auto h = histogram("h", {0.0, 0.1, 0.5, 0.9, 1.0, std::nan("")}, 4);
  ASSERT_EQ(h.y.size(), 4u);
  double total = 0.0;
  for (double c : h.y) total += c;
  EXPECT_EQ(total, 5.0);
  EXPECT_EQ(h.y.back(), 2.0);  // the maximum lands in the last bin
}

TEST(Report, EmptyRecordEmitsHeaderOnlyCsvAndValidSvg) {
  RunRecord r;
  r.kind = "gapped_study";
  r.columns = columns_for(ExperimentKind::gapped_study);
  const auto dir = scratch("empty_report");
  const auto files = emit_report(r, {ReportFormat::csv, ReportFormat::json, ReportFormat::svg}, dir);
  EXPECT_EQ(files.size(), 4u);
  EXPECT_EQ(slurp(dir / "metrics.csv"), csv_header(r.columns));
  const auto svg = slurp(dir / "achieved_gamma.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(RunRecord::load(dir / "record.json").dump(), r.dump());
}

TEST(Report, UnwritableDirectoryIsAnError) {
  const auto dir = scratch("unwritable");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_report(sample_record(), {ReportFormat::csv}, dir / "file" / "sub"), Error);
}

TEST(Report, FormatNamesParse) {
  EXPECT_EQ(parse_format("svg"), ReportFormat::svg);
  EXPECT_THROW(parse_format("png"), ConfigError);
}

// ---- runner ------------------------------------------------------------------

TEST(Runner, ScalingStudyEmitsOneRowPerSizeInstanceAndBeta) {
  auto c = scaling({8, 9, 10, 11, 12, 13, 14}, 10);
  c.beta_list = {2.0};
  const auto r = run_experiment(c, {4, {}, {}});
  ASSERT_TRUE(r.complete);
  ASSERT_EQ(r.rows.size(), 70u);
  const auto in = r.column("n"), ii = r.column("instance"), im = r.column("method");
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    EXPECT_EQ(std::get<std::int64_t>(r.rows[k][in]), 8 + static_cast<std::int64_t>(k / 10));
    EXPECT_EQ(std::get<std::int64_t>(r.rows[k][ii]), static_cast<std::int64_t>(k % 10));
    EXPECT_EQ(std::get<std::string>(r.rows[k][im]), k / 10 + 8 <= 12 ? "dense" : "iterative");
  }
  const auto& fit = r.summary["by_beta"][0]["fit"];
  ASSERT_TRUE(fit.is_object());
  EXPECT_TRUE(fit.contains("stretched") && fit.contains("exponential"));

  // The t_rel plot overlays both fitted models and the data points.
  const auto dir = scratch("scaling_report");
  emit_report(r, {ReportFormat::svg}, dir);
  const auto svg = slurp(dir / "t_rel_vs_n.svg");
  EXPECT_NE(svg.find("data-label=\"fit alpha=1/3 beta=2\""), std::string::npos);
  EXPECT_NE(svg.find("data-label=\"fit alpha=1 beta=2\""), std::string::npos);
  EXPECT_NE(svg.find("data-label=\"data beta=2\""), std::string::npos);
  EXPECT_NE(svg.find("<circle"), std::string::npos);
}

TEST(Runner, RerunGivesIdenticalBytesRegardlessOfThreads) {
  auto c = scaling({6, 7, 8}, 3);
  c.mixing = true;
  const auto d1 = scratch("rerun_1"), d2 = scratch("rerun_2");
  const auto r1 = run_experiment(c, {1, d1, {}});
  const auto r2 = run_experiment(c, {3, d2, {}});
  EXPECT_EQ(slurp(d1 / "metrics.csv"), slurp(d2 / "metrics.csv"));
  EXPECT_EQ(slurp(d1 / "record.json"), slurp(d2 / "record.json"));
  EXPECT_EQ(slurp(d1 / "metrics.csv"), r1.csv());
  EXPECT_EQ(r1.dump(), r2.dump());
  EXPECT_FALSE(r1.summary["curves"].empty());
  emit_report(r1, {ReportFormat::csv, ReportFormat::svg}, d1);
  emit_report(r2, {ReportFormat::csv, ReportFormat::svg}, d2);
  EXPECT_EQ(slurp(d1 / "mixing_curves.svg"), slurp(d2 / "mixing_curves.svg"));
  EXPECT_EQ(slurp(d1 / "metrics.csv"), slurp(d2 / "metrics.csv"));
}

TEST(Runner, InterruptedRunResumesToTheSameRecord) {
  ExperimentConfig c;
  c.kind = ExperimentKind::gapped_study;
  c.n_list = {10, 12, 14};
  c.instances = 3;
  c.seed = 5;
  const auto clean = scratch("resume_clean"), broken = scratch("resume_broken");
  run_experiment(c, {2, clean, {}});

  const auto partial = run_experiment(c, {2, broken, 4});
  EXPECT_FALSE(partial.complete);
  EXPECT_EQ(partial.tasks_done, 4u);
  const auto manifest = nlohmann::json::parse(slurp(broken / "manifest.json"));
  EXPECT_FALSE(manifest["complete"].get<bool>());
  EXPECT_EQ(manifest["tasks_done"].get<int>(), 4);
  EXPECT_EQ(manifest["rows_done"].get<int>(), 4);
  // Simulate a torn append after the last committed task.
  std::ofstream(broken / "metrics.csv", std::ios::app) << "14,0,0.1,garbage";
  std::ofstream(broken / "tasks.jsonl", std::ios::app) << "{\"key\": 1, \"rows\": [[";

  const auto resumed = run_experiment(c, {3, broken, {}});
  EXPECT_TRUE(resumed.complete);
  EXPECT_EQ(slurp(broken / "metrics.csv"), slurp(clean / "metrics.csv"));
  EXPECT_EQ(slurp(broken / "record.json"), slurp(clean / "record.json"));
  EXPECT_EQ(nlohmann::json::parse(slurp(broken / "timing.json"))["resumed_from"].get<int>(), 4);
}

TEST(Runner, RefusesAnOutputDirectoryOfAnotherConfig) {
  const auto dir = scratch("other_config");
  auto c = scaling({6}, 1);
  run_experiment(c, {1, dir, {}});
  c.seed = 99;
  EXPECT_THROW(run_experiment(c, {1, dir, {}}), ConfigError);
}

TEST(Runner, CompletedRunIsNotRecomputed) {
  const auto dir = scratch("completed");
  const auto c = scaling({6, 7}, 2);
  const auto first = run_experiment(c, {1, dir, {}});
  const auto before = slurp(dir / "metrics.csv");
  const auto second = run_experiment(c, {1, dir, {}});
  EXPECT_EQ(second.dump(), first.dump());
  EXPECT_EQ(slurp(dir / "metrics.csv"), before);
}

TEST(Runner, GateViolationsStopBeforeAnyWork) {
  const auto dir = scratch("gated");
  EXPECT_THROW(run_experiment(scaling({22}, 1), {1, dir, {}}), GateError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Runner, FreeEnergyMatchesGoldenFixture) {
  const auto c = load_config(fixture("free_energy_small.toml").string());
  const auto r = run_experiment(c);
  EXPECT_EQ(r.csv(), slurp(fixture("free_energy_small.metrics.csv")));
}

TEST(Runner, FreeEnergyHighTemperatureAgreesWithAnnealed) {
  ExperimentConfig c;
  c.kind = ExperimentKind::free_energy;
  c.n_list = {20};
  c.beta_list = {0.3};
  c.instances = 10;
  const auto r = run_experiment(c, {4, {}, {}});
  const auto& cell = r.summary["by_n_beta"][0];
  EXPECT_LE(std::abs(cell["mean_difference"].get<double>()), 0.02);
  EXPECT_EQ(cell["instances"].get<int>(), 10);
}

TEST(Runner, EveryKindProducesWellFormedRows) {
  std::vector<ExperimentConfig> configs(6);
  configs[0] = scaling({6}, 2);
  configs[1].kind = ExperimentKind::free_energy;
  configs[1].n_list = {6};
  configs[1].beta_list = {0.5, 1.0};
  configs[2].kind = ExperimentKind::bottleneck_pipeline;
  configs[2].n_list = {8};
  configs[2].beta_list = {1.0, 3.0};
  configs[3].kind = ExperimentKind::escape_study;
  configs[3].n_list = {10};
  configs[3].beta_list = {0.5, 1.0};
  configs[3].rho = 0.2;
  configs[3].reps = 20;
  configs[4].kind = ExperimentKind::restricted_norm_study;
  configs[4].n_list = {40};
  configs[4].rho_list = {0.1, 0.2};
  configs[4].instances = 2;
  configs[5].kind = ExperimentKind::gapped_study;
  configs[5].n_list = {8, 10};
  for (const auto& c : configs) {
    SCOPED_TRACE(to_string(c.kind));
    const auto r = run_experiment(c);
    EXPECT_TRUE(r.complete);
    EXPECT_FALSE(r.rows.empty());
    for (const auto& row : r.rows) EXPECT_EQ(row.size(), r.columns.size());
    EXPECT_FALSE(r.summary.empty());
    EXPECT_EQ(RunRecord::from_json(nlohmann::json::parse(r.dump())).dump(), r.dump());
    const auto dir = scratch("kind_" + to_string(c.kind));
    const auto files = emit_report(r, {ReportFormat::csv, ReportFormat::json, ReportFormat::svg}, dir);
    EXPECT_GE(files.size(), 3u);
  }
}

TEST(Runner, InstanceKeysSeparateSizes) {
  const auto tasks = plan(scaling({8, 10}, 2));
  ASSERT_EQ(tasks.size(), 4u);
  EXPECT_EQ(tasks[0].key, (std::uint64_t{8} << 32));
  EXPECT_EQ(tasks[3].key, (std::uint64_t{10} << 32) + 1);
}

// ---- cli ---------------------------------------------------------------------

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("experiment run " + fixture("free_energy_small.toml").string() + " --out-dir " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "free_energy.svg"));
  EXPECT_EQ(slurp(dir / "metrics.csv"), slurp(fixture("free_energy_small.metrics.csv")));
  EXPECT_EQ(cli("experiment run " + fixture("bad_key.toml").string()), 2);
  EXPECT_EQ(cli("experiment run " + fixture("over_gate.toml").string()), 3);
  EXPECT_EQ(cli("experiment fit " + (dir / "record.json").string()), 2);  // not a scaling study
  EXPECT_EQ(cli("report " + (dir / "record.json").string() + " --format svg --out-dir " + (dir / "r").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "r" / "free_energy.svg"));
  EXPECT_EQ(cli("spectral -n 22"), 3);
  EXPECT_EQ(cli("spectral -n 6 --beta 1 --method iterative"), 0);
  EXPECT_EQ(cli("gapped -n 10 --gamma -1"), 2);
  EXPECT_EQ(cli("--no-such-flag sample"), 2);
}

TEST(Cli, FitReadsAScalingRecord) {
  const auto dir = scratch("cli_fit");
  auto c = scaling({6, 7, 8, 9}, 2);
  run_experiment(c, {2, dir, {}});
  EXPECT_EQ(cli("experiment fit " + (dir / "record.json").string() + " --out-dir " + dir.string()), 0);
  const auto fits = nlohmann::json::parse(slurp(dir / "fit.json"));
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_TRUE(fits[0]["fit"].contains("verdict"));
}
