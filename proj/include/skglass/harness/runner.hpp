#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "skglass/bounds.hpp"
#include "skglass/disorder.hpp"
#include "skglass/dynamics.hpp"
#include "skglass/gapped.hpp"
#include "skglass/model.hpp"
#include "skglass/spectral.hpp"
#include "skglass/harness/config.hpp"
#include "skglass/harness/fit.hpp"
#include "skglass/harness/record.hpp"

namespace skglass::harness {

/// One unit of work: a single disorder instance at one N, all betas / rhos.
struct Task {
  std::int64_t n = 0;
  std::int64_t instance = 0;
  std::uint64_t key = 0;  // instance + (N << 32); disorder index and seed stream
};

struct TaskOutput {
  std::vector<Row> rows;
  nlohmann::json extra = nlohmann::json::object();
};

struct RunOptions {
  std::size_t threads = 1;
  std::filesystem::path out_dir;            // empty: nothing written
  std::optional<std::uint64_t> stop_after;  // commit this many tasks in total, then return
};

inline std::vector<Task> plan(const ExperimentConfig& c) {
  std::vector<Task> tasks;
  for (auto n : c.n_list)
    for (std::int64_t i = 0; i < c.instances; ++i)
      tasks.push_back({n, i, static_cast<std::uint64_t>(i) + (static_cast<std::uint64_t>(n) << 32)});
  return tasks;
}

inline std::vector<Column> columns_for(ExperimentKind kind) {
  using T = ColumnType;
  switch (kind) {
    case ExperimentKind::scaling_study:
      return {{"n", T::integer},      {"instance", T::integer}, {"beta", T::real},     {"gap", T::real},
              {"t_rel", T::real},     {"log_t_rel", T::real},   {"method", T::text},   {"residual", T::real},
              {"t_mix", T::integer},  {"mix_censored", T::integer}};
    case ExperimentKind::free_energy:
      return {{"n", T::integer},    {"instance", T::integer}, {"beta", T::real},
              {"quenched", T::real}, {"annealed", T::real},     {"difference", T::real}};
    case ExperimentKind::bottleneck_pipeline:
      return {{"n", T::integer},           {"instance", T::integer},      {"beta", T::real},
              {"rho", T::real},            {"gamma", T::real},            {"reference", T::text},
              {"reference_min_gap", T::real}, {"operator_norm", T::real}, {"restricted_ok", T::integer},
              {"min_drop", T::real},       {"log_ratio", T::real},        {"log_bound", T::real},
              {"ball_mass", T::real},      {"log_lower_bound", T::real},  {"t_rel", T::real},
              {"cheeger_consistent", T::integer}, {"hypotheses_met", T::integer}, {"certificate", T::integer}};
    case ExperimentKind::escape_study:
      return {{"n", T::integer},      {"instance", T::integer}, {"beta", T::real},         {"rho", T::real},
              {"radius", T::integer}, {"reps", T::integer},     {"cap", T::integer},       {"censored", T::integer},
              {"median_escape", T::real}, {"reference", T::text}, {"reference_min_gap", T::real}};
    case ExperimentKind::restricted_norm_study:
      return {{"n", T::integer},  {"instance", T::integer}, {"rho", T::real},  {"size", T::integer},
              {"norm", T::real},  {"scale", T::real},       {"ratio", T::real}};
    case ExperimentKind::gapped_study:
      return {{"n", T::integer},         {"instance", T::integer},  {"gamma", T::real},
              {"delta", T::real},        {"min_gap", T::real},      {"below_count", T::integer},
              {"verdict", T::integer},   {"is_local_max", T::integer}, {"budget_used", T::integer},
              {"config", T::text}};
  }
  return {};
}

namespace detail {

inline Cell opt(const std::optional<double>& v) { return v ? Cell(*v) : Cell(std::monostate{}); }
inline Cell flag(bool b) { return std::int64_t{b ? 1 : 0}; }
inline Cell integer(std::uint64_t v) { return static_cast<std::int64_t>(v); }

/// d(t) curves are thinned to at most ~200 points for the record.
inline nlohmann::json thin_curve(const MixingCurve& m) {
  nlohmann::json pts = nlohmann::json::array();
  const std::size_t stride = std::max<std::size_t>(1, m.points.size() / 200);
  for (std::size_t i = 0; i < m.points.size(); ++i)
    if (i % stride == 0 || i + 1 == m.points.size()) pts.push_back({m.points[i].first, m.points[i].second});
  return pts;
}

inline GappedStateReport find_reference(const ExperimentConfig& c, const SymmetricCoupling& a, std::uint64_t seed) {
  SearchOptions opts;
  opts.budget = static_cast<std::uint64_t>(c.budget);
  opts.seed = seed;
  return search_gapped(a, c.gamma, c.delta, opts);
}

}  // namespace detail

/// Deterministic in (config, task); safe to call concurrently.
inline TaskOutput run_task(const ExperimentConfig& c, const Task& task) {
  const auto n = static_cast<std::size_t>(task.n);
  const std::uint64_t seed = derive_seed(static_cast<std::uint64_t>(c.seed), task.key);
  const auto a = sample_symmetric(DisorderSpec{c.law, n, static_cast<std::uint64_t>(c.seed), task.key, {}});
  TaskOutput out;
  const Cell cn = task.n, ci = task.instance;

  switch (c.kind) {
    case ExperimentKind::scaling_study: {
      nlohmann::json curves = nlohmann::json::array();
      for (double beta : c.beta_list) {
        const auto p = build_transition(a, beta);
        const auto method = n <= kDenseGate ? SpectralMethod::dense : SpectralMethod::iterative;
        const auto r = spectral_gap(p, method);
        Cell t_mix = std::monostate{}, censored = std::monostate{};
        if (c.mixing) {
          const auto m = mixing_time_exact(p);
          censored = detail::flag(m.censored);
          if (m.t_mix) t_mix = detail::integer(*m.t_mix);
          if (task.instance == 0) curves.push_back({{"beta", beta}, {"points", detail::thin_curve(m)}});
        }
        out.rows.push_back({cn, ci, beta, r.gap, r.t_rel, std::log(r.t_rel), to_string(r.method), r.residual, t_mix,
                            censored});
      }
      if (!curves.empty()) out.extra["curves"] = curves;
      break;
    }
    case ExperimentKind::free_energy:
      for (double beta : c.beta_list) {
        const auto f = free_energy_pair(a, beta);
        out.rows.push_back({cn, ci, beta, f.quenched_per_site, f.annealed_per_site,
                            f.quenched_per_site - f.annealed_per_site});
      }
      break;
    case ExperimentKind::bottleneck_pipeline: {
      const auto ref = detail::find_reference(c, a, seed);
      for (double beta : c.beta_list) {
        PipelineParams params;
        params.beta = beta;
        params.gamma = c.gamma;
        params.delta = c.delta;
        params.rho = c.rho;
        params.budget = static_cast<std::uint64_t>(c.budget);
        params.seed = seed;
        params.reference = ref.config;
        const auto r = theorem_pipeline(a, params);
        Cell cheeger = std::monostate{};
        if (r.cheeger_consistent) cheeger = detail::flag(*r.cheeger_consistent);
        out.rows.push_back({cn, ci, beta, c.rho, c.gamma, ref.config.to_hex(), ref.min_gap(), r.operator_norm,
                            detail::flag(r.restricted_ok), r.sphere.min_drop, r.bottleneck.log_ratio,
                            r.bottleneck.log_bound, detail::opt(r.bottleneck.ball_mass), r.log_lower_bound,
                            detail::opt(r.t_rel), cheeger, detail::flag(r.hypotheses_met),
                            detail::flag(r.exponential_certificate)});
      }
      break;
    }
    case ExperimentKind::escape_study: {
      const auto ref = detail::find_reference(c, a, seed);
      for (std::size_t b = 0; b < c.beta_list.size(); ++b) {
        const double beta = c.beta_list[b];
        const auto s = escape_time(a, ref.config, beta, c.rho, static_cast<std::uint64_t>(c.reps),
                                   static_cast<std::uint64_t>(c.cap), derive_seed(seed, b));
        out.rows.push_back({cn, ci, beta, c.rho, detail::integer(s.radius), c.reps, c.cap,
                            detail::integer(s.censored_count), detail::opt(s.median()), ref.config.to_hex(),
                            ref.min_gap()});
      }
      break;
    }
    case ExperimentKind::restricted_norm_study:
      for (std::size_t r = 0; r < c.rho_list.size(); ++r) {
        const double rho = c.rho_list[r];
        const auto rep = restricted_norm(a, rho, SubsetMode::heuristic, static_cast<std::uint64_t>(c.restarts),
                                         derive_seed(seed, r));
        const double scale = restricted_norm_scale(rho, n);
        out.rows.push_back({cn, ci, rho, detail::integer(rep.max_size), rep.norm, scale, rep.norm / scale});
      }
      break;
    case ExperimentKind::gapped_study: {
      const auto ref = detail::find_reference(c, a, seed);
      out.rows.push_back({cn, ci, c.gamma, c.delta, ref.min_gap(), detail::integer(ref.below_count),
                          detail::flag(ref.verdict), detail::flag(ref.is_local_max), detail::integer(ref.budget_used),
                          ref.config.to_hex()});
      if (task.instance == 0) out.extra["profile"] = ref.profile.values();
      break;
    }
  }
  return out;
}

namespace detail {

inline double real_at(const Row& r, std::size_t i) {
  if (std::holds_alternative<double>(r[i])) return std::get<double>(r[i]);
  if (std::holds_alternative<std::int64_t>(r[i])) return static_cast<double>(std::get<std::int64_t>(r[i]));
  return std::numeric_limits<double>::quiet_NaN();
}

inline double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(xs.size());
}

inline nlohmann::json number(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

/// Groups a real column by the values of key columns, in sorted key order.
inline std::map<std::vector<double>, std::vector<double>> group(const std::vector<Row>& rows,
                                                                 const std::vector<std::size_t>& keys,
                                                                 std::size_t value) {
  std::map<std::vector<double>, std::vector<double>> out;
  for (const auto& r : rows) {
    std::vector<double> k;
    for (auto i : keys) k.push_back(real_at(r, i));
    auto& bucket = out[k];
    const double v = real_at(r, value);
    if (!std::isnan(v)) bucket.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Aggregates committed rows (and per-task extras) into the record summary.
/// Medians over instances throughout, except free energy which uses means.
inline nlohmann::json summarize(const ExperimentConfig& c, const RunRecord& rec,
                                const std::vector<nlohmann::json>& extras) {
  using detail::group;
  using detail::number;
  nlohmann::json s = nlohmann::json::object();
  const auto col = [&](const char* name) { return rec.column(name); };
  const auto tasks = plan(c);

  switch (c.kind) {
    case ExperimentKind::scaling_study: {
      nlohmann::json by_beta = nlohmann::json::array();
      const auto g = group(rec.rows, {col("beta"), col("n")}, col("log_t_rel"));
      for (double beta : c.beta_list) {
        std::map<double, std::vector<double>> by_n;
        nlohmann::json ns = nlohmann::json::array(), med = nlohmann::json::array();
        for (const auto& [key, values] : g)
          if (key[0] == beta && !values.empty()) {
            by_n[key[1]] = values;
            ns.push_back(static_cast<std::int64_t>(key[1]));
            med.push_back(median(values));
          }
        nlohmann::json entry{{"beta", beta}, {"n", ns}, {"median_log_t_rel", med}};
        if (by_n.size() >= 4)
          entry["fit"] = fit_medians(by_n).to_json();
        else
          entry["fit"] = nullptr;
        by_beta.push_back(entry);
      }
      s["by_beta"] = by_beta;
      nlohmann::json curves = nlohmann::json::array();
      for (std::size_t t = 0; t < extras.size(); ++t)
        if (extras[t].contains("curves"))
          for (const auto& cv : extras[t]["curves"])
            curves.push_back({{"n", tasks[t].n}, {"beta", cv["beta"]}, {"points", cv["points"]}});
      s["curves"] = curves;
      break;
    }
    case ExperimentKind::free_energy: {
      nlohmann::json cells = nlohmann::json::array();
      const auto q = group(rec.rows, {col("n"), col("beta")}, col("quenched"));
      const auto an = group(rec.rows, {col("n"), col("beta")}, col("annealed"));
      for (const auto& [key, values] : q) {
        const double mq = detail::mean(values), ma = detail::mean(an.at(key));
        cells.push_back({{"n", static_cast<std::int64_t>(key[0])},
                         {"beta", key[1]},
                         {"instances", values.size()},
                         {"mean_quenched", number(mq)},
                         {"mean_annealed", number(ma)},
                         {"mean_difference", number(mq - ma)}});
      }
      s["by_n_beta"] = cells;
      break;
    }
    case ExperimentKind::bottleneck_pipeline: {
      nlohmann::json cells = nlohmann::json::array();
      const auto lb = group(rec.rows, {col("n"), col("beta")}, col("log_lower_bound"));
      const auto tr = group(rec.rows, {col("n"), col("beta")}, col("t_rel"));
      const auto ok = group(rec.rows, {col("n"), col("beta")}, col("cheeger_consistent"));
      for (const auto& [key, values] : lb) {
        std::vector<double> log_t;
        for (double t : tr.at(key)) log_t.push_back(std::log(t));
        double consistent = 0.0;
        for (double v : ok.at(key)) consistent += v;
        cells.push_back({{"n", static_cast<std::int64_t>(key[0])},
                         {"beta", key[1]},
                         {"median_log_lower_bound", number(median(values))},
                         {"median_log_t_rel", number(median(log_t))},
                         {"cheeger_consistent", consistent},
                         {"instances", values.size()}});
      }
      s["by_n_beta"] = cells;
      break;
    }
    case ExperimentKind::escape_study: {
      nlohmann::json cells = nlohmann::json::array();
      const auto g = group(rec.rows, {col("n"), col("beta")}, col("median_escape"));
      for (const auto& [key, values] : g)
        cells.push_back({{"n", static_cast<std::int64_t>(key[0])},
                         {"beta", key[1]},
                         {"median_escape", number(median(values))},
                         {"uncensored_instances", values.size()}});
      s["by_n_beta"] = cells;
      break;
    }
    case ExperimentKind::restricted_norm_study: {
      nlohmann::json by_n = nlohmann::json::array();
      const auto g = group(rec.rows, {col("n"), col("rho")}, col("ratio"));
      std::map<double, std::vector<std::pair<double, double>>> per_n;
      for (const auto& [key, values] : g) per_n[key[0]].push_back({key[1], median(values)});
      for (const auto& [size, pairs] : per_n) {
        nlohmann::json rhos = nlohmann::json::array(), cs = nlohmann::json::array();
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& [rho, cval] : pairs) {
          rhos.push_back(rho);
          cs.push_back(number(cval));
          lo = std::min(lo, cval);
          hi = std::max(hi, cval);
        }
        by_n.push_back({{"n", static_cast<std::int64_t>(size)},
                        {"rho", rhos},
                        {"fitted_constant", cs},
                        {"max_constant", number(hi)},
                        {"spread", number(hi / lo - 1.0)}});
      }
      s["by_n"] = by_n;
      break;
    }
    case ExperimentKind::gapped_study: {
      nlohmann::json by_n = nlohmann::json::array();
      const auto g = group(rec.rows, {col("n")}, col("min_gap"));
      const auto v = group(rec.rows, {col("n")}, col("verdict"));
      for (const auto& [key, values] : g)
        by_n.push_back({{"n", static_cast<std::int64_t>(key[0])},
                        {"median_min_gap", number(median(values))},
                        {"verdict_fraction", number(detail::mean(v.at(key)))}});
      s["by_n"] = by_n;
      nlohmann::json profiles = nlohmann::json::array();
      for (std::size_t t = 0; t < extras.size(); ++t)
        if (extras[t].contains("profile")) profiles.push_back({{"n", tasks[t].n}, {"values", extras[t]["profile"]}});
      s["profiles"] = profiles;
      break;
    }
  }
  return s;
}

namespace detail {

inline std::string task_line(const Task& t, const TaskOutput& o) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : o.rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& c : r) jr.push_back(cell_to_json(c));
    rows.push_back(std::move(jr));
  }
  return nlohmann::json{{"key", t.key}, {"rows", rows}, {"extra", o.extra}}.dump() + "\n";
}

inline std::string manifest_text(const RunRecord& r) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : r.columns) cols.push_back(c.name);
  return nlohmann::json{{"version", r.version},
                        {"schema", r.schema},
                        {"kind", r.kind},
                        {"config_hash", r.config_hash},
                        {"config", r.config_text},
                        {"columns", cols},
                        {"tasks_done", r.tasks_done},
                        {"tasks_total", r.tasks_total},
                        {"rows_done", r.rows.size()},
                        {"complete", r.complete}}
             .dump(2) +
         "\n";
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void append(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + p.string());
  out << bytes;
  out.flush();
  if (!out) throw Error("short write to " + p.string());
}

}  // namespace detail

/// Runs every task and assembles the record.
///
/// With an output directory the run is crash-safe: each committed task is
/// appended to tasks.jsonl and metrics.csv, then manifest.json is replaced
/// atomically. Only the manifest's tasks_done counts; a rerun with the same
/// config hash discards anything past it and continues. Tasks execute on a
/// bounded pool but are committed strictly in plan order, so outputs do not
/// depend on the thread count.
inline RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
  validate(config);
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();
  const auto tasks = plan(config);

  RunRecord rec;
  rec.kind = to_string(config.kind);
  rec.config_text = to_text(config);
  rec.config_hash = config_hash(config);
  rec.columns = columns_for(config.kind);
  rec.tasks_total = tasks.size();
  std::vector<nlohmann::json> extras;

  const bool persist = !options.out_dir.empty();
  const fs::path manifest = options.out_dir / "manifest.json", metrics = options.out_dir / "metrics.csv",
                 journal = options.out_dir / "tasks.jsonl", final_record = options.out_dir / "record.json";
  if (persist) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec || !fs::is_directory(options.out_dir))
      throw Error("cannot create output directory " + options.out_dir.string());
    if (fs::exists(manifest)) {
      nlohmann::json m;
      try {
        m = nlohmann::json::parse(detail::read_file(manifest));
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("unreadable manifest " + manifest.string() + ": " + e.what());
      }
      if (m.value("config_hash", "") != rec.config_hash)
        throw ConfigError("output directory " + options.out_dir.string() + " holds a run of a different config");
      if (m.value("complete", false) && fs::exists(final_record)) return RunRecord::load(final_record);
      const auto done = m.at("tasks_done").get<std::uint64_t>();
      std::istringstream lines(detail::read_file(journal));
      std::string line, kept;
      for (std::uint64_t t = 0; t < done; ++t) {
        if (!std::getline(lines, line)) throw FormatError("task journal is shorter than the manifest claims");
        const auto j = nlohmann::json::parse(line);
        if (j.at("key").get<std::uint64_t>() != tasks[t].key) throw FormatError("task journal out of plan order");
        for (const auto& jr : j.at("rows")) {
          Row row;
          for (std::size_t i = 0; i < jr.size(); ++i) row.push_back(cell_from_json(jr[i], rec.columns[i].type));
          rec.rows.push_back(std::move(row));
        }
        extras.push_back(j.at("extra"));
        kept += line + "\n";
      }
      rec.tasks_done = done;
      write_atomic(journal, kept);
    } else {
      write_atomic(journal, "");
    }
    std::string csv = csv_header(rec.columns);
    for (const auto& r : rec.rows) csv += csv_line(r);
    write_atomic(metrics, csv);
    write_atomic(manifest, detail::manifest_text(rec));
  }

  const std::uint64_t resumed_from = rec.tasks_done;
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  std::uint64_t limit = tasks.size();
  if (options.stop_after) limit = std::min<std::uint64_t>(limit, *options.stop_after);

  while (rec.tasks_done < limit) {
    const std::size_t begin = rec.tasks_done;
    const std::size_t end = std::min<std::size_t>(limit, begin + 2 * threads);
    std::vector<TaskOutput> outs(end - begin);
    std::vector<std::exception_ptr> errors(end - begin);
    std::atomic<std::size_t> next{begin};
    auto worker = [&] {
      for (std::size_t t; (t = next.fetch_add(1)) < end;) {
        try {
          outs[t - begin] = run_task(config, tasks[t]);
        } catch (...) {
          errors[t - begin] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(threads, end - begin); ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (std::size_t t = begin; t < end; ++t) {
      if (errors[t - begin]) std::rethrow_exception(errors[t - begin]);
      auto& o = outs[t - begin];
      if (persist) {
        detail::append(journal, detail::task_line(tasks[t], o));
        std::string lines;
        for (const auto& r : o.rows) lines += csv_line(r);
        detail::append(metrics, lines);
      }
      for (auto& r : o.rows) rec.rows.push_back(std::move(r));
      extras.push_back(std::move(o.extra));
      ++rec.tasks_done;
      if (persist) write_atomic(manifest, detail::manifest_text(rec));
    }
  }

  rec.complete = rec.tasks_done == rec.tasks_total;
  if (rec.complete) rec.summary = summarize(config, rec, extras);
  if (persist) {
    write_atomic(final_record, rec.dump());
    write_atomic(manifest, detail::manifest_text(rec));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_atomic(options.out_dir / "timing.json",
                 nlohmann::json{{"wall_seconds", seconds},
                                {"threads", threads},
                                {"tasks_run", rec.tasks_done - resumed_from},
                                {"resumed_from", resumed_from}}
                         .dump(2) +
                     "\n");
  }
  return rec;
}

}  // namespace skglass::harness
