#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "skglass/disorder.hpp"
#include "skglass/errors.hpp"
#include "skglass/numerics.hpp"
#include "skglass/rng.hpp"

namespace skglass {

/// A point of {-1,+1}^N stored one bit per site (bit 1 means +1).
class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  explicit SpinConfiguration(std::size_t n, bool all_up = true)
      : n_(n), words_((n + 63) / 64, all_up ? ~std::uint64_t{0} : 0) {
    trim();
  }

  static SpinConfiguration from_spins(std::span<const int> spins) {
    SpinConfiguration c(spins.size(), false);
    for (std::size_t i = 0; i < spins.size(); ++i) {
      require(spins[i] == 1 || spins[i] == -1, "spins must be +1 or -1");
      if (spins[i] == 1) c.words_[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    return c;
  }

  /// Site i is +1 iff bit i of `index` is set. Requires n <= 64.
  static SpinConfiguration from_index(std::size_t n, std::uint64_t index) {
    require(n <= 64, "from_index needs N <= 64");
    SpinConfiguration c(n, false);
    if (n > 0) c.words_[0] = index;
    c.trim();
    return c;
  }

  static SpinConfiguration random(std::size_t n, Rng& rng) {
    SpinConfiguration c(n, false);
    for (auto& w : c.words_) w = rng.next_u64();
    c.trim();
    return c;
  }

  std::size_t size() const { return n_; }
  bool bit(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  int spin(std::size_t i) const { return bit(i) ? 1 : -1; }
  void flip(std::size_t i) { words_[i / 64] ^= std::uint64_t{1} << (i % 64); }

  std::uint64_t to_index() const {
    require(n_ <= 64, "to_index needs N <= 64");
    return n_ == 0 ? 0 : words_[0];
  }

  SpinConfiguration negated() const {
    SpinConfiguration c = *this;
    for (auto& w : c.words_) w = ~w;
    c.trim();
    return c;
  }

  /// Copy with sign chosen so that site 0 is +1.
  SpinConfiguration canonical() const { return (n_ > 0 && !bit(0)) ? negated() : *this; }

  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) v(static_cast<Eigen::Index>(i)) = spin(i);
    return v;
  }

  std::vector<int> to_spins() const {
    std::vector<int> s(n_);
    for (std::size_t i = 0; i < n_; ++i) s[i] = spin(i);
    return s;
  }

  /// Hex string of the configuration read as a binary number with site 0 as
  /// the least significant bit; most significant digit first, ceil(N/4) digits.
  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    const std::size_t count = (n_ + 3) / 4;
    std::string out(count, '0');
    for (std::size_t d = 0; d < count; ++d) {
      unsigned nibble = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t i = 4 * d + b;
        if (i < n_ && bit(i)) nibble |= 1U << b;
      }
      out[count - 1 - d] = digits[nibble];
    }
    return out;
  }

  static SpinConfiguration from_hex(std::size_t n, const std::string& hex) {
    require(hex.size() == (n + 3) / 4, "hex configuration has the wrong length for N");
    SpinConfiguration c(n, false);
    for (std::size_t d = 0; d < hex.size(); ++d) {
      const char ch = hex[hex.size() - 1 - d];
      unsigned nibble;
      if (ch >= '0' && ch <= '9') nibble = static_cast<unsigned>(ch - '0');
      else if (ch >= 'a' && ch <= 'f') nibble = static_cast<unsigned>(ch - 'a' + 10);
      else if (ch >= 'A' && ch <= 'F') nibble = static_cast<unsigned>(ch - 'A' + 10);
      else throw ConfigError("invalid hex digit in configuration");
      for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t i = 4 * d + b;
        if (nibble & (1U << b)) {
          require(i < n, "hex configuration sets bits beyond N");
          c.flip(i);
        }
      }
    }
    return c;
  }

  friend std::size_t hamming_distance(const SpinConfiguration& a, const SpinConfiguration& b) {
    require(a.n_ == b.n_, "hamming_distance: size mismatch");
    std::size_t d = 0;
    for (std::size_t w = 0; w < a.words_.size(); ++w) d += static_cast<std::size_t>(std::popcount(a.words_[w] ^ b.words_[w]));
    return d;
  }

  bool operator==(const SpinConfiguration&) const = default;
  bool operator<(const SpinConfiguration& o) const {
    return n_ != o.n_ ? n_ < o.n_ : std::lexicographical_compare(words_.rbegin(), words_.rend(), o.words_.rbegin(), o.words_.rend());
  }

 private:
  void trim() {
    if (n_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (n_ % 64)) - 1;
  }

  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

inline void check_dimensions(const SymmetricCoupling& a, const SpinConfiguration& s) {
  if (a.size() != s.size())
    throw DimensionError("coupling has N=" + std::to_string(a.size()) + " but configuration has N=" +
                         std::to_string(s.size()));
}

/// Reference inverse temperature of the usual SK convention. Informational only.
inline constexpr double kReferenceCriticalBeta = 1.0;

/// H_N(s) = <s, G s> / sqrt(N) = <s, A s> / 2.
inline double energy(const SymmetricCoupling& a, const SpinConfiguration& s) {
  check_dimensions(a, s);
  const Eigen::VectorXd v = s.to_vector();
  return 0.5 * v.dot(a.matrix() * v);
}

/// L_i(s) = (A s)_i - A_ii s_i, i.e. s_i (H(s) - H(s with site i flipped)) / 2.
inline Eigen::VectorXd local_fields(const SymmetricCoupling& a, const SpinConfiguration& s) {
  check_dimensions(a, s);
  const Eigen::VectorXd v = s.to_vector();
  Eigen::VectorXd fields = a.matrix() * v;
  fields -= a.matrix().diagonal().cwiseProduct(v);
  return fields;
}

/// Configuration with cached energy and local fields. Flip deltas are O(1),
/// flips O(N). Single owner; the coupling must outlive the state.
class EnergyState {
 public:
  EnergyState(const SymmetricCoupling& a, SpinConfiguration config)
      : a_(&a), config_(std::move(config)) {
    check_dimensions(a, config_);
    refresh();
  }

  void refresh() {
    spins_ = config_.to_vector();
    fields_ = a_->matrix() * spins_;
    energy_ = 0.5 * spins_.dot(fields_);
    fields_ -= a_->matrix().diagonal().cwiseProduct(spins_);
  }

  std::size_t size() const { return config_.size(); }
  const SymmetricCoupling& coupling() const { return *a_; }
  const SpinConfiguration& config() const { return config_; }
  double energy() const { return energy_; }
  const Eigen::VectorXd& fields() const { return fields_; }
  double local_field(std::size_t i) const { return fields_(static_cast<Eigen::Index>(i)); }
  double spin(std::size_t i) const { return spins_(static_cast<Eigen::Index>(i)); }

  /// s_i L_i: half the energy lost by flipping site i.
  double gap(std::size_t i) const { return spin(i) * local_field(i); }

  /// H(s with site i flipped) - H(s) = -2 s_i L_i.
  double flip_delta(std::size_t i) const {
    check_index(i);
    return -2.0 * gap(i);
  }

  /// Flips site i and updates energy and all local fields.
  void apply_flip(std::size_t i) {
    check_index(i);
    flip_unchecked(i);
  }

  void flip_unchecked(std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double old = spins_(ii);
    energy_ += -2.0 * old * fields_(ii);
    const double diag = a_->matrix()(ii, ii);
    fields_.noalias() -= (2.0 * old) * a_->matrix().col(ii);
    fields_(ii) += 2.0 * old * diag;
    spins_(ii) = -old;
    config_.flip(i);
  }

 private:
  void check_index(std::size_t i) const {
    if (i >= config_.size()) throw ConfigError("site index " + std::to_string(i) + " out of range");
  }

  const SymmetricCoupling* a_;
  SpinConfiguration config_;
  Eigen::VectorXd spins_;
  Eigen::VectorXd fields_;
  double energy_ = 0.0;
};

inline constexpr std::size_t kPartitionGate = 25;

/// Visits every configuration with site 0 = +1 in reflected-binary Gray-code
/// order (site k+1 flips at step whose trailing zero count is k). The visitor
/// receives the EnergyState; negations share the energy by evenness of H.
template <typename Visitor>
void visit_half_gray(const SymmetricCoupling& a, Visitor&& visit) {
  const std::size_t n = a.size();
  require(n >= 1 && n <= 63, "Gray-code enumeration needs 1 <= N <= 63");
  EnergyState state(a, SpinConfiguration(n, true));
  const std::uint64_t count = std::uint64_t{1} << (n - 1);
  visit(std::as_const(state));
  for (std::uint64_t k = 1; k < count; ++k) {
    state.flip_unchecked(1 + static_cast<std::size_t>(std::countr_zero(k)));
    visit(std::as_const(state));
  }
}

/// log Z_N(beta) = log sum_s exp(beta H_N(s)) by exact enumeration (N <= 25).
inline double log_partition(const SymmetricCoupling& a, double beta) {
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and non-negative");
  require_gate(a.size() <= kPartitionGate,
               "log_partition: N=" + std::to_string(a.size()) + " exceeds the enumeration gate N <= 25");
  const double n_log2 = static_cast<double>(a.size()) * std::log(2.0);
  if (beta == 0.0) return n_log2;
  StreamingLogSumExp lse;
  visit_half_gray(a, [&](const EnergyState& s) { lse.add(beta * s.energy()); });
  return std::log(2.0) + lse.value();
}

struct FreeEnergyPair {
  double quenched_per_site;
  double annealed_per_site;
};

/// Quenched log Z / N for this instance against the annealed log E Z / N =
/// log 2 + beta^2 v / 2. With H = <s, G s>/sqrt(N) over the full IID grid,
/// Var H = N for every s, so v = 1 by default.
inline FreeEnergyPair free_energy_pair(const SymmetricCoupling& a, double beta, double variance_per_site = 1.0) {
  const double n = static_cast<double>(a.size());
  return {log_partition(a, beta) / n, std::log(2.0) + 0.5 * beta * beta * variance_per_site};
}

}  // namespace skglass
