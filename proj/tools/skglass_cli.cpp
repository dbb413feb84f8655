// skglass command line: module drivers plus the experiment harness.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 gate violation,
// 4 numerical non-convergence, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "skglass/skglass.hpp"

namespace fs = std::filesystem;
using namespace skglass;
using namespace skglass::harness;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_dir;
  std::string format;
};

struct Source {
  std::size_t n = 10;
  std::string law = "gaussian";
  std::uint64_t index = 0;
  std::string matrix;

  void attach(CLI::App* cmd) {
    cmd->add_option("-n,--n", n, "number of spins")->capture_default_str();
    cmd->add_option("--law", law, "gaussian or rademacher")->capture_default_str();
    cmd->add_option("--index", index, "instance index under the master seed")->capture_default_str();
    cmd->add_option("--matrix", matrix, "load disorder from a matrix file instead of sampling");
  }

  CouplingMatrix raw(const Globals& g) const {
    if (!matrix.empty()) return load_matrix(matrix);
    const Law l = parse_law(law);
    require(l != Law::custom, "custom laws are available through the library only");
    return sample_disorder(DisorderSpec{l, n, g.seed, index, {}});
  }

  SymmetricCoupling coupling(const Globals& g) const { return symmetrize(raw(g)); }
};

/// Prints to stdout; with --out-dir also writes `name` there.
void emit(const Globals& g, const std::string& name, const std::string& bytes) {
  std::cout << bytes;
  if (g.out_dir.empty()) return;
  fs::create_directories(g.out_dir);
  write_atomic(fs::path(g.out_dir) / name, bytes);
}

void emit_json(const Globals& g, const std::string& stem, const nlohmann::json& j) {
  emit(g, stem + ".json", j.dump(2) + "\n");
}

SpinConfiguration start_config(const std::string& hex, std::size_t n, std::uint64_t seed) {
  if (!hex.empty()) return SpinConfiguration::from_hex(n, hex);
  Rng rng(seed, 0x7374);
  return SpinConfiguration::random(n, rng);
}

std::set<ReportFormat> formats_of(const Globals& g) {
  if (g.format.empty()) return {ReportFormat::csv, ReportFormat::json, ReportFormat::svg};
  return {parse_format(g.format)};
}

nlohmann::json fit_record(const RunRecord& r) {
  require(r.kind == "scaling_study", "fit needs a scaling_study record, got " + r.kind);
  const auto ib = r.column("beta"), in = r.column("n"), it = r.column("log_t_rel");
  std::map<double, std::map<double, std::vector<double>>> by_beta;
  for (const auto& row : r.rows) {
    if (!std::holds_alternative<double>(row[it])) continue;
    by_beta[std::get<double>(row[ib])][static_cast<double>(std::get<std::int64_t>(row[in]))].push_back(
        std::get<double>(row[it]));
  }
  require(!by_beta.empty(), "record has no relaxation times");
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [beta, by_n] : by_beta) out.push_back({{"beta", beta}, {"fit", fit_medians(by_n).to_json()}});
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"skglass: Sherrington-Kirkpatrick spin-glass lab"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may also follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for experiments")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "directory for output files");
  app.add_option("--format", g.format, "csv, json or svg")->check(CLI::IsMember({"csv", "json", "svg"}));

  // sample
  auto* sample = app.add_subcommand("sample", "sample a disorder matrix and save it");
  Source s_src;
  s_src.attach(sample);
  std::string s_output;
  sample->add_option("-o,--output", s_output, "matrix file path (default <out-dir>/matrix_<N>_<index>.skg)");

  // gapped
  auto* gapped = app.add_subcommand("gapped", "search for a (gamma, delta)-gapped local maximum");
  Source g_src;
  g_src.attach(gapped);
  double g_gamma = 0.1, g_delta = 0.0;
  std::uint64_t g_budget = 0;
  bool g_enumerate = false;
  gapped->add_option("--gamma", g_gamma)->capture_default_str();
  gapped->add_option("--delta", g_delta)->capture_default_str();
  gapped->add_option("--budget", g_budget, "flip evaluations, 0 = 1000 N")->capture_default_str();
  gapped->add_flag("--enumerate", g_enumerate, "also enumerate every local maximum (N <= 20)");

  // dynamics
  auto* dynamics = app.add_subcommand("dynamics", "heat-bath Glauber trajectory or escape times");
  Source d_src;
  d_src.attach(dynamics);
  double d_beta = 1.0, d_rho = 0.1, d_gamma = 0.1;
  std::uint64_t d_steps = 10000, d_thin = 1, d_reps = 100, d_cap = 1000000;
  std::string d_start;
  bool d_escape = false;
  dynamics->add_option("--beta", d_beta)->capture_default_str();
  dynamics->add_option("--steps", d_steps)->capture_default_str();
  dynamics->add_option("--thin", d_thin)->capture_default_str();
  dynamics->add_option("--start", d_start, "start (or escape reference) as hex, site 0 = least significant bit");
  dynamics->add_flag("--escape", d_escape, "measure escape times from a searched gapped state");
  dynamics->add_option("--rho", d_rho)->capture_default_str();
  dynamics->add_option("--gamma", d_gamma, "gamma for the reference search")->capture_default_str();
  dynamics->add_option("--reps", d_reps)->capture_default_str();
  dynamics->add_option("--cap", d_cap)->capture_default_str();

  // spectral
  auto* spectral = app.add_subcommand("spectral", "spectral gap, mixing curve and Cheeger check");
  Source p_src;
  p_src.attach(spectral);
  double p_beta = 1.0, p_eps = 0.25;
  std::string p_method = "dense";
  bool p_mixing = false, p_cheeger = false;
  spectral->add_option("--beta", p_beta)->capture_default_str();
  spectral->add_option("--method", p_method)->check(CLI::IsMember({"dense", "iterative"}))->capture_default_str();
  spectral->add_flag("--mixing", p_mixing, "exact worst-case mixing curve (N <= 12)");
  spectral->add_option("--epsilon", p_eps)->capture_default_str();
  spectral->add_flag("--cheeger", p_cheeger, "conductance scan against the gap (N <= 10)");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "bottleneck lower-bound pipeline");
  Source b_src;
  b_src.attach(bounds);
  PipelineParams b_params;
  std::string b_reference;
  bool b_text = false;
  bounds->add_option("--beta", b_params.beta)->capture_default_str();
  bounds->add_option("--gamma", b_params.gamma)->capture_default_str();
  bounds->add_option("--delta", b_params.delta)->capture_default_str();
  bounds->add_option("--rho", b_params.rho)->capture_default_str();
  bounds->add_option("--norm-constant", b_params.norm_constant)->capture_default_str();
  bounds->add_option("--budget", b_params.budget)->capture_default_str();
  bounds->add_option("--reference", b_reference, "reference configuration as hex (default: search)");
  bounds->add_flag("--text", b_text, "print the hypothesis summary instead of JSON");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "declarative experiments");
  experiment->require_subcommand(1);
  auto* exp_run = experiment->add_subcommand("run", "run a config file");
  std::string config_path;
  exp_run->add_option("config", config_path)->required();
  auto* exp_fit = experiment->add_subcommand("fit", "scaling fits from a scaling_study record");
  std::string fit_path;
  exp_fit->add_option("record", fit_path)->required();

  // report
  auto* report = app.add_subcommand("report", "emit CSV / JSON / SVG for a record");
  std::string report_path;
  report->add_option("record", report_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*sample) {
    const auto raw = s_src.raw(g);
    auto a = symmetrize(raw);
    fs::path out = s_output.empty() ? fs::path(g.out_dir.empty() ? "." : g.out_dir) /
                                          ("matrix_" + std::to_string(raw.size()) + "_" +
                                           std::to_string(raw.spec.instance_index) + ".skg")
                                    : fs::path(s_output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_matrix(out, raw);
    std::cout << nlohmann::json{{"n", raw.size()},
                                {"law", to_string(raw.spec.law)},
                                {"seed", raw.spec.master_seed},
                                {"index", raw.spec.instance_index},
                                {"operator_norm", operator_norm(a)},
                                {"file", out.string()}}
                     .dump(2)
              << "\n";
  } else if (*gapped) {
    const auto a = g_src.coupling(g);
    SearchOptions opts;
    opts.budget = g_budget;
    opts.seed = g.seed;
    auto j = search_gapped(a, g_gamma, g_delta, opts).to_json();
    if (g_enumerate) {
      const auto list = enumerate_local_maxima(a);
      j["local_maxima"] = list.maxima.size();
      if (!list.maxima.empty()) {
        j["maximin_gap"] = list.most_gapped().profile.min_gap();
        j["deepest_config_hex"] = list.deepest().config.to_hex();
      }
    }
    emit_json(g, "gapped", j);
  } else if (*dynamics) {
    const auto a = d_src.coupling(g);
    if (d_escape) {
      SpinConfiguration ref = d_start.empty() ? [&] {
        SearchOptions opts;
        opts.seed = g.seed;
        return search_gapped(a, d_gamma, 0.0, opts).config;
      }()
                                              : SpinConfiguration::from_hex(a.size(), d_start);
      emit_json(g, "escape", escape_time(a, ref, d_beta, d_rho, d_reps, d_cap, g.seed).to_json());
    } else {
      GlauberChain chain(a, start_config(d_start, a.size(), g.seed), d_beta, g.seed);
      RunObservers obs;
      obs.thin = d_thin;
      const auto t = run(chain, d_steps, obs);
      if (g.format == "csv") {
        std::ostringstream o;
        t.write_csv(o);
        emit(g, "trajectory.csv", o.str());
      } else {
        emit_json(g, "trajectory", {{"n", a.size()},
                                    {"beta", d_beta},
                                    {"steps", d_steps},
                                    {"accepted", t.accepted},
                                    {"accepted_downhill", t.accepted_downhill},
                                    {"final_energy", t.energies.empty() ? 0.0 : t.energies.back()},
                                    {"final_config_hex", t.final_config.to_hex()}});
      }
    }
  } else if (*spectral) {
    const auto a = p_src.coupling(g);
    const auto p = build_transition(a, p_beta);
    const auto r = spectral_gap(p, p_method == "dense" ? SpectralMethod::dense : SpectralMethod::iterative);
    auto j = r.to_json();
    if (p_mixing) {
      const auto m = mixing_time_exact(p, p_eps);
      if (g.format == "csv") {
        std::ostringstream o;
        m.write_csv(o);
        emit(g, "mixing_curve.csv", o.str());
        return 0;
      }
      j["mixing"] = m.to_json();
    }
    if (p_cheeger) j["cheeger"] = cheeger_check(p).to_json();
    emit_json(g, "spectral", j);
  } else if (*bounds) {
    const auto a = b_src.coupling(g);
    b_params.seed = g.seed;
    if (!b_reference.empty()) b_params.reference = SpinConfiguration::from_hex(a.size(), b_reference);
    const auto rec = theorem_pipeline(a, b_params);
    if (b_text)
      emit(g, "bounds.txt", rec.summary());
    else
      emit_json(g, "bounds", rec.to_json());
  } else if (*exp_run) {
    auto config = load_config(config_path);
    validate(config);
    const fs::path dir = !g.out_dir.empty()             ? fs::path(g.out_dir)
                         : !config.output_dir.empty()   ? fs::path(config.output_dir)
                                                        : fs::path("skglass_out");
    RunOptions opts;
    opts.threads = g.threads;
    opts.out_dir = dir;
    const auto rec = run_experiment(config, opts);
    emit_report(rec, formats_of(g), dir);
    std::cout << rec.kind << ": " << rec.rows.size() << " rows, " << rec.tasks_done << "/" << rec.tasks_total
              << " tasks, hash " << rec.config_hash << ", output in " << dir.string() << "\n";
  } else if (*exp_fit) {
    emit_json(g, "fit", fit_record(RunRecord::load(fit_path)));
  } else if (*report) {
    const auto rec = RunRecord::load(report_path);
    const fs::path dir = !g.out_dir.empty() ? fs::path(g.out_dir) : fs::path(report_path).parent_path();
    for (const auto& p : emit_report(rec, formats_of(g), dir.empty() ? fs::path(".") : dir))
      std::cout << p.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const GateError& e) {
    std::cerr << "gate violation: " << e.what() << "\n";
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "did not converge: " << e.what() << " (best estimate " << e.best_estimate() << ", residual "
              << e.residual() << ")\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "bad input file: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
