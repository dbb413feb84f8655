#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "skglass/errors.hpp"
#include "skglass/harness/fit.hpp"
#include "skglass/harness/record.hpp"
#include "skglass/harness/svg.hpp"

namespace skglass::harness {

enum class ReportFormat { csv, json, svg };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "svg") return ReportFormat::svg;
  throw ConfigError("unknown report format '" + s + "' (expected csv, json or svg)");
}

namespace report_detail {

inline double as_double(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

inline std::string beta_label(const nlohmann::json& beta) { return "beta=" + format_double(as_double(beta)); }

/// Column values of rows whose key column equals `key`, as (x, y) pairs.
inline Series column_series(const RunRecord& r, const std::string& label, const std::string& x, const std::string& y,
                            SeriesStyle style, const std::string& key_col = "", double key = 0.0) {
  Series s{label, {}, {}, style};
  const auto ix = r.column(x), iy = r.column(y);
  const auto ik = key_col.empty() ? ix : r.column(key_col);
  auto value = [](const Cell& c) {
    if (std::holds_alternative<double>(c)) return std::get<double>(c);
    if (std::holds_alternative<std::int64_t>(c)) return static_cast<double>(std::get<std::int64_t>(c));
    return std::numeric_limits<double>::quiet_NaN();
  };
  for (const auto& row : r.rows) {
    if (!key_col.empty() && value(row[ik]) != key) continue;
    s.x.push_back(value(row[ix]));
    s.y.push_back(value(row[iy]));
  }
  return s;
}

inline std::vector<Plot> plots_for(const RunRecord& r) {
  std::vector<Plot> plots;
  const auto& s = r.summary;
  if (r.kind == "scaling_study") {
    Plot p{"relaxation time vs N", "N", "t_rel", true, {}};
    if (s.contains("by_beta"))
      for (const auto& b : s["by_beta"]) {
        const double beta = as_double(b["beta"]);
        auto pts = column_series(r, "data " + beta_label(b["beta"]), "n", "t_rel", SeriesStyle::points, "beta", beta);
        Series med{"median " + beta_label(b["beta"]), {}, {}, SeriesStyle::points};
        for (std::size_t i = 0; i < b["n"].size(); ++i) {
          med.x.push_back(as_double(b["n"][i]));
          med.y.push_back(std::exp(as_double(b["median_log_t_rel"][i])));
        }
        p.series.push_back(std::move(pts));
        p.series.push_back(std::move(med));
        if (b["fit"].is_object() && !b["n"].empty()) {
          const double lo = as_double(b["n"].front()), hi = as_double(b["n"].back());
          for (const char* which : {"stretched", "exponential"}) {
            const auto& f = b["fit"][which];
            ScalingFit fit{as_double(f["alpha"]), as_double(f["a"]), as_double(f["b"]), 0.0, 0};
            Series line{std::string(which == std::string("stretched") ? "fit alpha=1/3 " : "fit alpha=1 ") +
                            beta_label(b["beta"]),
                        {}, {}, SeriesStyle::line};
            for (int k = 0; k <= 40; ++k) {
              const double n = lo + (hi - lo) * k / 40.0;
              line.x.push_back(n);
              line.y.push_back(std::exp(fit.predict(n)));
            }
            p.series.push_back(std::move(line));
          }
        }
      }
    plots.push_back(std::move(p));
    if (s.contains("curves") && !s["curves"].empty()) {
      Plot d{"worst-case distance to stationarity", "t", "d(t)", true, {}};
      d.log_x = true;
      for (const auto& c : s["curves"]) {
        Series line{"N=" + c["n"].dump() + " " + beta_label(c["beta"]), {}, {}, SeriesStyle::line};
        for (const auto& pt : c["points"]) {
          line.x.push_back(as_double(pt[0]));
          line.y.push_back(as_double(pt[1]));
        }
        d.series.push_back(std::move(line));
      }
      plots.push_back(std::move(d));
    }
  } else if (r.kind == "gapped_study") {
    Plot p{"achieved minimum gap vs N", "N", "min s_i L_i", false, {}};
    p.series.push_back(column_series(r, "instances", "n", "min_gap", SeriesStyle::points));
    Series med{"median", {}, {}, SeriesStyle::line};
    if (s.contains("by_n"))
      for (const auto& e : s["by_n"]) {
        med.x.push_back(as_double(e["n"]));
        med.y.push_back(as_double(e["median_min_gap"]));
      }
    p.series.push_back(std::move(med));
    plots.push_back(std::move(p));
    Plot h{"gap profile histogram", "s_i L_i", "count", false, {}};
    if (s.contains("profiles"))
      for (const auto& e : s["profiles"]) {
        std::vector<double> v;
        for (const auto& x : e["values"]) v.push_back(as_double(x));
        h.series.push_back(histogram("N=" + e["n"].dump(), v, 20));
      }
    plots.push_back(std::move(h));
  } else if (r.kind == "free_energy") {
    Plot p{"free energy per site", "beta", "log Z / N", false, {}};
    if (s.contains("by_n_beta")) {
      std::map<std::int64_t, std::pair<Series, Series>> by_n;
      for (const auto& e : s["by_n_beta"]) {
        const auto n = e["n"].get<std::int64_t>();
        auto& [q, a] = by_n[n];
        q.label = "quenched N=" + std::to_string(n);
        q.style = SeriesStyle::points;
        a.label = "annealed N=" + std::to_string(n);
        a.style = SeriesStyle::line;
        q.x.push_back(as_double(e["beta"]));
        q.y.push_back(as_double(e["mean_quenched"]));
        a.x.push_back(as_double(e["beta"]));
        a.y.push_back(as_double(e["mean_annealed"]));
      }
      for (auto& [n, qa] : by_n) {
        p.series.push_back(std::move(qa.first));
        p.series.push_back(std::move(qa.second));
      }
    }
    plots.push_back(std::move(p));
  } else if (r.kind == "escape_study" || r.kind == "bottleneck_pipeline") {
    const bool escape = r.kind == "escape_study";
    Plot p{escape ? "median escape time vs beta" : "Cheeger lower bound vs relaxation time", "beta",
           escape ? "steps" : "log time", escape, {}};
    if (s.contains("by_n_beta")) {
      std::map<std::int64_t, std::vector<Series>> by_n;
      for (const auto& e : s["by_n_beta"]) {
        const auto n = e["n"].get<std::int64_t>();
        auto& v = by_n[n];
        if (v.empty()) {
          if (escape) {
            v.push_back({"N=" + std::to_string(n), {}, {}, SeriesStyle::line});
          } else {
            v.push_back({"lower bound N=" + std::to_string(n), {}, {}, SeriesStyle::line});
            v.push_back({"log t_rel N=" + std::to_string(n), {}, {}, SeriesStyle::points});
          }
        }
        v[0].x.push_back(as_double(e["beta"]));
        v[0].y.push_back(as_double(e[escape ? "median_escape" : "median_log_lower_bound"]));
        if (!escape) {
          v[1].x.push_back(as_double(e["beta"]));
          v[1].y.push_back(as_double(e["median_log_t_rel"]));
        }
      }
      for (auto& [n, v] : by_n)
        for (auto& x : v) p.series.push_back(std::move(x));
    }
    plots.push_back(std::move(p));
  } else if (r.kind == "restricted_norm_study") {
    Plot p{"restricted norm over sqrt(rho log(1/rho) N)", "rho", "ratio", false, {}};
    if (s.contains("by_n"))
      for (const auto& e : s["by_n"]) {
        Series line{"N=" + e["n"].dump(), {}, {}, SeriesStyle::line};
        for (std::size_t i = 0; i < e["rho"].size(); ++i) {
          line.x.push_back(as_double(e["rho"][i]));
          line.y.push_back(as_double(e["fitted_constant"][i]));
        }
        p.series.push_back(std::move(line));
      }
    plots.push_back(std::move(p));
  }
  return plots;
}

inline std::string plot_file(const std::string& kind, std::size_t i) {
  static const std::map<std::string, std::vector<std::string>> names{
      {"scaling_study", {"t_rel_vs_n.svg", "mixing_curves.svg"}},
      {"gapped_study", {"achieved_gamma.svg", "gap_histogram.svg"}},
      {"free_energy", {"free_energy.svg"}},
      {"escape_study", {"escape_time.svg"}},
      {"bottleneck_pipeline", {"lower_bound.svg"}},
      {"restricted_norm_study", {"restricted_norm.svg"}}};
  auto it = names.find(kind);
  if (it != names.end() && i < it->second.size()) return it->second[i];
  return "plot_" + std::to_string(i) + ".svg";
}

}  // namespace report_detail

/// Writes metrics.csv, record.json and the kind's SVG plots (as selected)
/// into `dir`; returns the paths written. Output bytes depend only on the
/// record.
inline std::vector<std::filesystem::path> emit_report(const RunRecord& record, const std::set<ReportFormat>& formats,
                                                      const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot write report into " + dir.string());
  std::vector<fs::path> written;
  auto put = [&](const fs::path& p, const std::string& bytes) {
    write_atomic(p, bytes);
    written.push_back(p);
  };
  if (formats.count(ReportFormat::csv)) put(dir / "metrics.csv", record.csv());
  if (formats.count(ReportFormat::json)) put(dir / "record.json", record.dump());
  if (formats.count(ReportFormat::svg)) {
    const auto plots = report_detail::plots_for(record);
    for (std::size_t i = 0; i < plots.size(); ++i)
      put(dir / report_detail::plot_file(record.kind, i), plots[i].render());
  }
  return written;
}

}  // namespace skglass::harness
