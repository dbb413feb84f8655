#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "skglass/errors.hpp"
#include "skglass/numerics.hpp"

namespace skglass::harness {

/// log t = a + b N^alpha, alpha held fixed.
struct ScalingFit {
  double alpha = 1.0;
  double a = 0.0;
  double b = 0.0;
  double rss = 0.0;
  std::size_t points = 0;

  double predict(double n) const { return a + b * std::pow(n, alpha); }

  nlohmann::json to_json() const {
    return {{"alpha", alpha}, {"a", a}, {"b", b}, {"rss", rss}, {"points", points}};
  }
};

struct FitComparison {
  ScalingFit stretched;    // alpha = 1/3
  ScalingFit exponential;  // alpha = 1
  double separation = 1.0;  // larger rss over smaller rss
  std::optional<double> preferred_alpha;

  std::string verdict() const {
    if (!preferred_alpha) return "no winner";
    return *preferred_alpha == 1.0 ? "alpha=1" : "alpha=1/3";
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"stretched", stretched.to_json()},
                     {"exponential", exponential.to_json()},
                     {"verdict", verdict()}};
    j["separation"] = std::isfinite(separation) ? nlohmann::json(separation) : nlohmann::json("inf");
    return j;
  }
};

inline constexpr double kNoWinnerRatio = 1.1;

inline ScalingFit fit_fixed_alpha(const std::vector<double>& n, const std::vector<double>& log_t, double alpha) {
  require(n.size() == log_t.size(), "fit: N and log t lengths differ");
  ScalingFit f;
  f.alpha = alpha;
  f.points = n.size();
  std::vector<double> x(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) x[i] = std::pow(n[i], alpha);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += log_t[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (log_t[i] - my);
  }
  f.b = sxy / sxx;
  f.a = my - f.b * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = log_t[i] - f.a - f.b * x[i];
    f.rss += r * r;
  }
  return f;
}

/// Both fixed-exponent fits on (N, median log t) points. Needs at least four
/// distinct N. Declares no winner when the residuals are within 10% or both
/// vanish at rounding level.
inline FitComparison fit_scaling(const std::vector<double>& n, const std::vector<double>& log_t) {
  require(n.size() == log_t.size(), "fit: N and log t lengths differ");
  for (std::size_t i = 0; i < n.size(); ++i)
    require(n[i] > 0.0 && std::isfinite(log_t[i]), "fit: N must be positive and log t finite");
  std::vector<double> distinct(n);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.size() >= 4, "fit: need at least 4 distinct N values");

  FitComparison c;
  c.stretched = fit_fixed_alpha(n, log_t, 1.0 / 3.0);
  c.exponential = fit_fixed_alpha(n, log_t, 1.0);
  double scale = 0.0;
  for (double y : log_t) scale += y * y;
  const double floor = 1e-20 * std::max(1.0, scale);
  const double lo = std::min(c.stretched.rss, c.exponential.rss);
  const double hi = std::max(c.stretched.rss, c.exponential.rss);
  if (hi <= floor) {
    c.separation = 1.0;
  } else {
    c.separation = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (c.separation >= kNoWinnerRatio)
      c.preferred_alpha = c.stretched.rss < c.exponential.rss ? 1.0 / 3.0 : 1.0;
  }
  return c;
}

/// Median over instances per N, then the fit.
inline FitComparison fit_medians(const std::map<double, std::vector<double>>& log_t_by_n) {
  std::vector<double> n, y;
  for (const auto& [size, values] : log_t_by_n) {
    if (values.empty()) continue;
    n.push_back(size);
    y.push_back(median(values));
  }
  return fit_scaling(n, y);
}

}  // namespace skglass::harness
