#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"

#include "skglass/model.hpp"
#include "skglass/numerics.hpp"

namespace skglass {

/// Heat-bath acceptance 1 / (1 + exp(-beta * delta)) for an energy change delta.
inline double heat_bath_probability(double beta, double delta) {
  return 1.0 / (1.0 + std::exp(-beta * delta));
}

/// Discrete-time single-site Glauber dynamics with heat-bath acceptance:
/// pick a uniform site, flip it with probability 1/(1 + e^{-beta dH}).
class GlauberChain {
 public:
  GlauberChain(const SymmetricCoupling& a, SpinConfiguration start, double beta, std::uint64_t seed,
               std::uint64_t stream = 0)
      : state_(a, std::move(start)), beta_(beta), rng_(seed, stream) {
    require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and non-negative");
  }

  /// One step. Returns the flipped site, or nothing when the chain held.
  std::optional<std::size_t> step() {
    const std::size_t i = rng_.below(state_.size());
    const double delta = -2.0 * state_.gap(i);
    const double u = rng_.uniform();
    ++steps_;
    if (u < heat_bath_probability(beta_, delta)) {
      state_.flip_unchecked(i);
      last_delta_ = delta;
      return i;
    }
    return std::nullopt;
  }

  const EnergyState& state() const { return state_; }
  double beta() const { return beta_; }
  std::uint64_t steps_taken() const { return steps_; }
  /// Energy change of the most recent accepted flip.
  double last_delta() const { return last_delta_; }

 private:
  EnergyState state_;
  double beta_;
  Rng rng_;
  std::uint64_t steps_ = 0;
  double last_delta_ = 0.0;
};

struct RunObservers {
  std::uint64_t thin = 1;  // record after every `thin`-th step
  bool energy = true;
  std::optional<SpinConfiguration> reference;  // overlap <s, ref>/N is recorded when set
};

struct Trajectory {
  std::vector<std::uint64_t> steps;
  std::vector<double> energies;
  std::vector<double> overlaps;
  std::uint64_t accepted = 0;
  std::uint64_t accepted_downhill = 0;  // accepted flips that lowered H
  SpinConfiguration final_config;

  void write_csv(std::ostream& out) const {
    out << "step,energy,overlap\n";
    for (std::size_t k = 0; k < steps.size(); ++k) {
      out << steps[k] << ',';
      if (k < energies.size()) out << format_double(energies[k]);
      out << ',';
      if (k < overlaps.size()) out << format_double(overlaps[k]);
      out << '\n';
    }
  }
};

inline Trajectory run(GlauberChain& chain, std::uint64_t steps, const RunObservers& observers = {}) {
  require(observers.thin >= 1, "thinning factor must be at least 1");
  if (observers.reference) check_dimensions(chain.state().coupling(), *observers.reference);
  Trajectory t;
  const double n = static_cast<double>(chain.state().size());
  for (std::uint64_t k = 1; k <= steps; ++k) {
    if (chain.step()) {
      ++t.accepted;
      if (chain.last_delta() < 0.0) ++t.accepted_downhill;
    }
    if (k % observers.thin == 0) {
      t.steps.push_back(chain.steps_taken());
      if (observers.energy) t.energies.push_back(chain.state().energy());
      if (observers.reference) {
        const double same = n - static_cast<double>(hamming_distance(chain.state().config(), *observers.reference));
        t.overlaps.push_back((2.0 * same - n) / n);
      }
    }
  }
  t.final_config = chain.state().config();
  return t;
}

/// Visit frequencies of all 2^N states over `steps` steps (N <= 20).
inline std::vector<double> empirical_distribution(GlauberChain& chain, std::uint64_t steps) {
  const std::size_t n = chain.state().size();
  require_gate(n <= 20, "empirical_distribution: N exceeds 20");
  std::vector<double> counts(std::size_t{1} << n, 0.0);
  std::uint64_t index = chain.state().config().to_index();
  for (std::uint64_t k = 0; k < steps; ++k) {
    if (auto site = chain.step()) index ^= std::uint64_t{1} << *site;
    counts[index] += 1.0;
  }
  for (auto& c : counts) c /= static_cast<double>(steps);
  return counts;
}

struct EscapeTimeStats {
  std::vector<std::uint64_t> samples;  // uncensored exit times, in replicate order
  std::uint64_t censored_count = 0;
  std::uint64_t reps = 0;
  std::uint64_t cap = 0;
  double rho = 0.0;
  std::size_t radius = 0;  // exit when the distance exceeds this
  double beta = 0.0;
  SpinConfiguration reference;

  /// Median over all replicates with censored runs counted as +infinity.
  /// Defined only while fewer than half of the runs are censored.
  std::optional<double> median() const {
    if (reps == 0 || 2 * censored_count >= reps) return std::nullopt;
    std::vector<double> all(samples.begin(), samples.end());
    all.resize(reps, std::numeric_limits<double>::infinity());
    return skglass::median(std::move(all));
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"reference_hex", reference.to_hex()},
                     {"n", reference.size()},
                     {"beta", beta},
                     {"rho", rho},
                     {"radius", radius},
                     {"reps", reps},
                     {"cap", cap},
                     {"censored_count", censored_count},
                     {"samples", samples}};
    if (auto m = median()) j["median"] = *m;
    else j["median"] = nullptr;
    return j;
  }
};

/// Runs `reps` independent chains from `reference` and records the first step
/// at which the Hamming distance to it exceeds rho*N (leaving the closed ball).
/// Runs still inside after `cap` steps are censored.
inline EscapeTimeStats escape_time(const SymmetricCoupling& a, const SpinConfiguration& reference, double beta,
                                   double rho, std::uint64_t reps, std::uint64_t cap, std::uint64_t seed) {
  check_dimensions(a, reference);
  require(rho > 0.0 && rho < 0.5, "rho must lie in (0, 1/2)");
  require(cap > 0, "cap must be positive");
  const double radius_real = rho * static_cast<double>(a.size()) + 1e-9;
  require(radius_real >= 1.0, "rho*N < 1: the ball is a single point");

  EscapeTimeStats stats;
  stats.reps = reps;
  stats.cap = cap;
  stats.rho = rho;
  stats.beta = beta;
  stats.radius = static_cast<std::size_t>(std::floor(radius_real));
  stats.reference = reference;
  for (std::uint64_t rep = 0; rep < reps; ++rep) {
    GlauberChain chain(a, reference, beta, seed, rep);
    std::size_t distance = 0;
    bool escaped = false;
    for (std::uint64_t t = 1; t <= cap; ++t) {
      if (auto site = chain.step()) {
        if (chain.state().config().bit(*site) != reference.bit(*site)) ++distance;
        else --distance;
        if (distance > stats.radius) {
          stats.samples.push_back(t);
          escaped = true;
          break;
        }
      }
    }
    if (!escaped) ++stats.censored_count;
  }
  return stats;
}

}  // namespace skglass
