#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"

#include "skglass/model.hpp"

namespace skglass {

/// Sorted values of s_i L_i(s).
class GapProfile {
 public:
  GapProfile() = default;
  explicit GapProfile(std::vector<double> values) : values_(std::move(values)) {
    std::sort(values_.begin(), values_.end());
  }

  static GapProfile of(const EnergyState& state) {
    std::vector<double> v(state.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = state.gap(i);
    return GapProfile(std::move(v));
  }

  const std::vector<double>& values() const { return values_; }
  double min_gap() const { return values_.empty() ? 0.0 : values_.front(); }

  /// |{i : s_i L_i < gamma}|
  std::size_t below_count(double gamma) const {
    return static_cast<std::size_t>(std::lower_bound(values_.begin(), values_.end(), gamma) - values_.begin());
  }

 private:
  std::vector<double> values_;
};

struct GappedStateReport {
  SpinConfiguration config;
  GapProfile profile;
  double gamma = 0.0;
  double delta = 0.0;
  std::size_t below_count = 0;
  bool verdict = false;
  bool is_local_max = false;
  std::uint64_t budget_used = 0;
  std::uint64_t seed = 0;

  double min_gap() const { return profile.min_gap(); }

  nlohmann::json to_json() const {
    return {{"config_hex", config.to_hex()}, {"n", config.size()},       {"min_gap", min_gap()},
            {"gamma", gamma},                {"delta", delta},            {"below_count", below_count},
            {"verdict", verdict},            {"is_local_max", is_local_max}, {"budget_used", budget_used},
            {"seed", seed}};
  }
};

/// Lexicographic order on (below_count ascending, min_gap descending).
inline bool better_report(const GappedStateReport& a, const GappedStateReport& b) {
  if (a.below_count != b.below_count) return a.below_count < b.below_count;
  return a.min_gap() > b.min_gap();
}

inline void check_gapped_parameters(double gamma, double delta) {
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
  require(delta >= 0.0 && delta < 1.0, "delta must lie in [0, 1)");
}

inline GappedStateReport make_report(const EnergyState& state, double gamma, double delta) {
  GappedStateReport r;
  r.config = state.config();
  r.profile = GapProfile::of(state);
  r.gamma = gamma;
  r.delta = delta;
  r.below_count = r.profile.below_count(gamma);
  r.verdict = static_cast<double>(r.below_count) <= delta * static_cast<double>(state.size());
  r.is_local_max = r.profile.min_gap() >= 0.0;
  return r;
}

/// Definition check: at most delta*N sites with s_i L_i < gamma.
inline GappedStateReport verify_gapped(const SymmetricCoupling& a, const SpinConfiguration& s, double gamma,
                                       double delta) {
  check_gapped_parameters(gamma, delta);
  return make_report(EnergyState(a, s), gamma, delta);
}

enum class AscentRule { steepest, first_improvement };

namespace detail {

/// Climbs to a single-flip local maximum of H. `blocked` sites are never
/// flipped. Returns the number of flip evaluations spent.
inline std::uint64_t ascend(EnergyState& state, AscentRule rule, Rng& rng,
                            const std::vector<char>* blocked = nullptr) {
  const std::size_t n = state.size();
  auto allowed = [&](std::size_t i) { return !blocked || !(*blocked)[i]; };
  std::uint64_t evaluations = 0;
  if (rule == AscentRule::steepest) {
    while (true) {
      std::size_t best = n;
      double best_delta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!allowed(i)) continue;
        const double d = -2.0 * state.gap(i);
        ++evaluations;
        if (d > best_delta) {
          best_delta = d;
          best = i;
        }
      }
      if (best == n) return evaluations;
      state.flip_unchecked(best);
    }
  }
  while (true) {
    bool improved = false;
    for (std::size_t i : rng.permutation(n)) {
      if (!allowed(i)) continue;
      ++evaluations;
      if (state.gap(i) < 0.0) {
        state.flip_unchecked(i);
        improved = true;
      }
    }
    if (!improved) return evaluations;
  }
}

}  // namespace detail

/// Single-flip hill climbing on H. Steepest takes the largest increase with
/// lowest-index ties; first-improvement scans a fresh seed-derived permutation
/// each sweep.
inline SpinConfiguration greedy_ascent(const SymmetricCoupling& a, const SpinConfiguration& start,
                                       AscentRule rule = AscentRule::steepest, std::uint64_t seed = 0) {
  EnergyState state(a, start);
  Rng rng(seed, 0x61736365);
  detail::ascend(state, rule, rng);
  return state.config();
}

struct SearchOptions {
  std::uint64_t budget = 0;  // flip evaluations; 0 means 1000 * N
  std::uint64_t seed = 0;
  AscentRule rule = AscentRule::first_improvement;
  std::optional<SpinConfiguration> start;  // first restart begins here
  std::size_t tabu_tenure = 0;             // 0 means 2N
  std::optional<std::size_t> max_restarts;
};

/// Multi-restart ascent followed by min-field lifting.
///
/// Each restart climbs to a local maximum, then repeatedly tries flipping a
/// non-tabu site whose s_i L_i is below gamma (or the weakest site once none
/// is), re-climbs with that site held, and keeps the new local maximum if it
/// improves (below_count, min_gap) lexicographically. Flipped sites stay tabu
/// for the last `tabu_tenure` accepted moves. The best report over all
/// restarts is returned; exhausting the budget is not an error.
inline GappedStateReport search_gapped(const SymmetricCoupling& a, double gamma, double delta,
                                       const SearchOptions& options) {
  check_gapped_parameters(gamma, delta);
  const std::size_t n = a.size();
  const std::uint64_t budget = options.budget ? options.budget : 1000 * static_cast<std::uint64_t>(n);
  require(budget >= n, "search budget must be at least N");
  if (options.start) check_dimensions(a, *options.start);
  const std::size_t tenure = options.tabu_tenure ? options.tabu_tenure : 2 * n;

  Rng rng(options.seed, 0x67617070);
  std::uint64_t used = 0;
  std::optional<GappedStateReport> best;

  for (std::size_t restart = 0;; ++restart) {
    if (restart > 0 && (used >= budget || (options.max_restarts && restart >= *options.max_restarts))) break;
    SpinConfiguration start =
        (restart == 0 && options.start) ? *options.start : SpinConfiguration::random(n, rng);
    EnergyState state(a, std::move(start));
    used += detail::ascend(state, options.rule, rng);
    GappedStateReport current = make_report(state, gamma, delta);

    std::deque<std::size_t> tabu;
    std::vector<char> blocked(n, 0);
    while (used < budget) {
      std::vector<std::pair<double, std::size_t>> candidates;
      for (std::size_t i = 0; i < n; ++i)
        if (!blocked[i] && state.gap(i) < gamma) candidates.emplace_back(state.gap(i), i);
      if (candidates.empty()) {
        std::size_t weakest = n;
        for (std::size_t i = 0; i < n; ++i)
          if (!blocked[i] && (weakest == n || state.gap(i) < state.gap(weakest))) weakest = i;
        if (weakest == n) break;
        candidates.emplace_back(state.gap(weakest), weakest);
      }
      std::sort(candidates.begin(), candidates.end());

      bool moved = false;
      for (const auto& [gap, site] : candidates) {
        if (used >= budget) break;
        EnergyState trial = state;
        trial.flip_unchecked(site);
        ++used;
        blocked[site] = 1;
        used += detail::ascend(trial, options.rule, rng, &blocked);
        blocked[site] = 0;
        used += detail::ascend(trial, options.rule, rng);
        GappedStateReport candidate = make_report(trial, gamma, delta);
        if (better_report(candidate, current)) {
          state = std::move(trial);
          current = std::move(candidate);
          tabu.push_back(site);
          blocked[site] = 1;
          if (tabu.size() > tenure) {
            blocked[tabu.front()] = 0;
            tabu.pop_front();
          }
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (!best || better_report(current, *best)) best = std::move(current);
  }
  best->budget_used = used;
  best->seed = options.seed;
  return *best;
}

inline constexpr std::size_t kLocalMaximaGate = 20;

struct LocalMaximum {
  SpinConfiguration config;  // canonical sign: site 0 is +1
  GapProfile profile;
  double energy;
};

struct LocalMaximaList {
  bool degenerate = false;  // zero coupling: every configuration is a local max
  std::vector<LocalMaximum> maxima;

  /// Entry with the largest energy (the deepest well).
  const LocalMaximum& deepest() const {
    require(!maxima.empty(), "no local maxima listed");
    return *std::max_element(maxima.begin(), maxima.end(),
                             [](const auto& x, const auto& y) { return x.energy < y.energy; });
  }

  /// Entry with the largest minimum gap (the maximin local field).
  const LocalMaximum& most_gapped() const {
    require(!maxima.empty(), "no local maxima listed");
    return *std::max_element(maxima.begin(), maxima.end(), [](const auto& x, const auto& y) {
      return x.profile.min_gap() < y.profile.min_gap();
    });
  }
};

/// All local maxima up to global sign, by Gray-code enumeration (N <= 20).
inline LocalMaximaList enumerate_local_maxima(const SymmetricCoupling& a) {
  require_gate(a.size() <= kLocalMaximaGate,
               "enumerate_local_maxima: N=" + std::to_string(a.size()) + " exceeds the gate N <= 20");
  LocalMaximaList out;
  if (a.is_degenerate()) {
    out.degenerate = true;
    return out;
  }
  visit_half_gray(a, [&](const EnergyState& s) {
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.gap(i) < 0.0) return;
    out.maxima.push_back({s.config(), GapProfile::of(s), s.energy()});
  });
  return out;
}

}  // namespace skglass
