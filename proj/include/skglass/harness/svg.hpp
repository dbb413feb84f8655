#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace skglass::harness {

enum class SeriesStyle { points, line, bars };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  SeriesStyle style = SeriesStyle::points;
};

/// Minimal deterministic SVG plot: fixed canvas, fixed palette, coordinates
/// printed with two decimals. Non-finite points (and non-positive ones on a
/// log axis) are dropped.
struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
  bool log_x = false;

  std::string render() const;
};

namespace svg_detail {

inline constexpr double kWidth = 640, kHeight = 420;
inline constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#17becf"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) lo -= 0.5, hi += 0.5;
  }
};

}  // namespace svg_detail

inline std::string Plot::render() const {
  using namespace svg_detail;
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0.0) && (!log_x || x > 0.0);
  };
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };

  Range rx, ry;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (usable(s.x[i], s.y[i])) {
        rx.add(tx(s.x[i]));
        ry.add(ty(s.y[i]));
        if (s.style == SeriesStyle::bars && !log_y) ry.add(0.0);
      }
  rx.settle();
  ry.settle();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (ty(y) - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
       "</text>\n";
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double xv = rx.lo + (rx.hi - rx.lo) * k / 4.0;
    const double xp = kLeft + pw * k / 4.0;
    o += "<line x1=\"" + num(xp) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(xp) + "\" y2=\"" +
         num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(xp) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" + tick_label(log_x ? std::pow(10.0, xv) : xv) +
         "</text>\n";
    const double yv = ry.lo + (ry.hi - ry.lo) * k / 4.0;
    const double yp = kTop + ph - ph * k / 4.0;
    o += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(yp) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(yp) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(yp + 4) + "\" text-anchor=\"end\">" +
         tick_label(log_y ? std::pow(10.0, yv) : yv) + "</text>\n";
  }
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 10) + "\" text-anchor=\"middle\">" +
       escape(x_label) + (log_x ? " (log)" : "") + "</text>\n";
  o += "<text x=\"15\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
       num(kTop + ph / 2) + ")\">" + escape(y_label) + (log_y ? " (log)" : "") + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color = kPalette[si % std::size(kPalette)];
    o += "<g class=\"" + std::string(s.style == SeriesStyle::line ? "line" : s.style == SeriesStyle::bars ? "bars" : "points") +
         "\" data-label=\"" + escape(s.label) + "\">\n";
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (usable(s.x[i], s.y[i])) idx.push_back(i);
    if (s.style == SeriesStyle::line && !idx.empty()) {
      o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < idx.size(); ++k)
        o += (k ? " " : "") + num(px(s.x[idx[k]])) + "," + num(py(s.y[idx[k]]));
      o += "\"/>\n";
    } else if (s.style == SeriesStyle::bars) {
      double width = pw / std::max<std::size_t>(idx.size(), 1) * 0.9;
      const double base = log_y ? kTop + ph : py(0.0);
      for (auto i : idx) {
        const double top = py(s.y[i]);
        o += "<rect x=\"" + num(px(s.x[i]) - width / 2) + "\" y=\"" + num(std::min(top, base)) + "\" width=\"" +
             num(width) + "\" height=\"" + num(std::abs(base - top)) + "\" fill=\"" + color +
             "\" fill-opacity=\"0.6\"/>\n";
      }
    } else {
      for (auto i : idx)
        o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" + color +
             "\"/>\n";
    }
    o += "</g>\n";
    const double ly = kTop + 12 + 16 * static_cast<double>(si);
    o += "<rect x=\"" + num(kWidth - kRight + 12) + "\" y=\"" + num(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
         color + "\"/>\n";
    o += "<text x=\"" + num(kWidth - kRight + 28) + "\" y=\"" + num(ly + 1) + "\">" + escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

/// Equal-width bins over [min, max]; one bars series at the bin centres.
inline Series histogram(const std::string& label, const std::vector<double>& values, std::size_t bins) {
  Series s{label, {}, {}, SeriesStyle::bars};
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty() || bins == 0) return s;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn, hi = *mx > *mn ? *mx : *mn + 1.0;
  const double w = (hi - lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double x : v) counts[std::min(bins - 1, static_cast<std::size_t>((x - lo) / w))] += 1.0;
  for (std::size_t b = 0; b < bins; ++b) {
    s.x.push_back(lo + (static_cast<double>(b) + 0.5) * w);
    s.y.push_back(counts[b]);
  }
  return s;
}

}  // namespace skglass::harness
