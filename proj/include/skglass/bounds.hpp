#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "skglass/dynamics.hpp"
#include "skglass/gapped.hpp"
#include "skglass/model.hpp"
#include "skglass/numerics.hpp"
#include "skglass/spectral.hpp"

namespace skglass {

inline constexpr double kSubsetGate = 1e7;

enum class SubsetMode { exact, heuristic };
enum class SphereMode { exhaustive, sampled };
enum class BottleneckMode { exact, sampled };

inline std::string to_string(SubsetMode m) { return m == SubsetMode::exact ? "exact" : "heuristic"; }
inline std::string to_string(SphereMode m) { return m == SphereMode::exhaustive ? "exhaustive" : "sampled"; }
inline std::string to_string(BottleneckMode m) { return m == BottleneckMode::exact ? "exact" : "sampled"; }

/// sqrt(rho log(1/rho) N), the scale of the restricted-norm bound.
inline double restricted_norm_scale(double rho, std::size_t n) {
  return std::sqrt(rho * std::log(1.0 / rho) * static_cast<double>(n));
}

/// Sphere radius used by the sphere and bottleneck routines: round(rho N).
inline std::size_t sphere_distance(double rho, std::size_t n) {
  return static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
}

struct RestrictedNormReport {
  double rho = 0.0;
  SubsetMode mode = SubsetMode::exact;
  std::size_t max_size = 0;  // floor(rho N)
  std::vector<std::size_t> subset;
  double norm = 0.0;
  double constant = 1.0;
  double bound_rhs = 0.0;  // constant * sqrt(rho log(1/rho) N)
  std::uint64_t evaluated = 0;

  double fitted_constant() const { return norm / (bound_rhs / constant); }

  nlohmann::json to_json() const {
    return {{"rho", rho},       {"mode", to_string(mode)},   {"max_size", max_size},
            {"subset", subset}, {"norm", norm},              {"constant", constant},
            {"bound_rhs", bound_rhs}, {"within_bound", norm <= bound_rhs}, {"evaluated", evaluated}};
  }
};

namespace detail {

inline Eigen::MatrixXd principal(const Eigen::MatrixXd& a, const std::vector<std::size_t>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c)
      m(r, c) = a(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]),
                  static_cast<Eigen::Index>(idx[static_cast<std::size_t>(c)]));
  return m;
}

inline double symmetric_norm(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(m.rows() - 1)));
}

/// Largest eigenvalue and unit eigenvector of [[l, b], [b, d]].
inline std::pair<double, Eigen::Vector2d> top_of_2x2(double l, double b, double d) {
  const double mid = 0.5 * (l + d), half = 0.5 * (l - d);
  const double rad = std::hypot(half, b);
  const double mu = mid + rad;
  Eigen::Vector2d v;
  if (rad == 0.0) v << 1.0, 0.0;
  else if (half >= 0.0) v << half + rad, b;
  else v << b, rad - half;
  return {mu, v.normalized()};
}

/// One signed run: grow a support of size k greedily by the 2x2 score
/// against the current top eigenvector of sign*A_I, then refine it with
/// truncated power iteration. Returns the support.
inline std::vector<std::size_t> grow_support(const Eigen::MatrixXd& sa, std::size_t k, std::size_t i0,
                                             std::size_t j0) {
  const std::size_t n = static_cast<std::size_t>(sa.rows());
  auto at = [&](std::size_t i, std::size_t j) { return sa(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); };
  std::vector<std::size_t> support{i0, j0};
  std::vector<char> used(n, 0);
  used[i0] = used[j0] = 1;
  auto [lambda, v2] = top_of_2x2(at(i0, i0), at(i0, j0), at(j0, j0));
  std::vector<double> v{v2(0), v2(1)};
  // coupling[j] = sum_{i in I} sa(j, i) v_i
  std::vector<double> coupling(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) coupling[j] = at(j, i0) * v[0] + at(j, j0) * v[1];
  while (support.size() < k) {
    std::size_t best = n;
    double best_mu = -std::numeric_limits<double>::infinity();
    Eigen::Vector2d best_vec;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      auto [mu, vec] = top_of_2x2(lambda, coupling[j], at(j, j));
      if (mu > best_mu) {
        best_mu = mu;
        best = j;
        best_vec = vec;
      }
    }
    for (auto& x : v) x *= best_vec(0);
    v.push_back(best_vec(1));
    support.push_back(best);
    used[best] = 1;
    lambda = best_mu;
    for (std::size_t j = 0; j < n; ++j) coupling[j] = coupling[j] * best_vec(0) + at(j, best) * best_vec(1);
  }

  // Truncated power iteration on sa + shift I, keeping the k largest entries.
  const double shift = std::abs(lambda);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < k; ++t) x(static_cast<Eigen::Index>(support[t])) = v[t];
  std::vector<std::size_t> order(n);
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd y = sa * x + shift * x;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t p, std::size_t q) {
                        return std::abs(y(static_cast<Eigen::Index>(p))) > std::abs(y(static_cast<Eigen::Index>(q)));
                      });
    std::vector<std::size_t> next(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(next.begin(), next.end());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i : next) z(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(i));
    z.normalize();
    std::vector<std::size_t> sorted_support = support;
    std::sort(sorted_support.begin(), sorted_support.end());
    const bool same = next == sorted_support && (z - x).norm() < 1e-12;
    x = z;
    support = next;
    if (same) break;
  }
  std::sort(support.begin(), support.end());
  return support;
}

}  // namespace detail

/// sup over |I| <= floor(rho N) of ||A_{I x I}||_op. Exact mode enumerates
/// every subset of every size 1..floor(rho N); heuristic mode runs `budget`
/// restarts of greedy growth plus truncated power refinement for both signs
/// (the first restart seeds from the largest off-diagonal |A_ij|).
inline RestrictedNormReport restricted_norm(const SymmetricCoupling& a, double rho, SubsetMode mode,
                                            std::uint64_t budget = 20, std::uint64_t seed = 0,
                                            double constant = 1.0) {
  require(rho > 0.0 && rho < 0.5, "rho must lie in (0, 1/2)");
  const std::size_t n = a.size();
  const auto k = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n) + 1e-9));
  require(k >= 1, "floor(rho N) = 0: no admissible subset");
  RestrictedNormReport r;
  r.rho = rho;
  r.mode = mode;
  r.max_size = k;
  r.constant = constant;
  r.bound_rhs = constant * restricted_norm_scale(rho, n);
  const Eigen::MatrixXd& m = a.matrix();

  auto offer = [&](const std::vector<std::size_t>& idx) {
    const double v = detail::symmetric_norm(detail::principal(m, idx));
    ++r.evaluated;
    if (v > r.norm || r.subset.empty()) {
      r.norm = v;
      r.subset = idx;
    }
  };

  if (mode == SubsetMode::exact) {
    double total = 0.0;
    for (std::size_t s = 1; s <= k; ++s) total += binomial(n, s);
    require_gate(total <= kSubsetGate, "restricted_norm exact: more than 1e7 subsets");
    for (std::size_t s = 1; s <= k; ++s)
      for_each_combination(n, s, [&](std::span<const std::size_t> idx) {
        offer(std::vector<std::size_t>(idx.begin(), idx.end()));
      });
    return r;
  }

  require(budget >= 1, "heuristic restricted_norm needs at least one restart");
  for (std::size_t i = 0; i < n; ++i) offer({i});
  if (k == 1) return r;
  std::size_t bi = 0, bj = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) >
          std::abs(m(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(bj)))) {
        bi = i;
        bj = j;
      }
  Rng rng(seed, 0x726e6f72);
  const Eigen::MatrixXd neg = -m;
  for (std::uint64_t restart = 0; restart < budget; ++restart) {
    std::size_t i = bi, j = bj;
    if (restart > 0) {
      const auto pair = rng.subset(n, 2);
      i = pair[0];
      j = pair[1];
    }
    offer(detail::grow_support(m, k, i, j));
    offer(detail::grow_support(neg, k, i, j));
  }
  return r;
}

/// Least-squares C in norm ~ C sqrt(rho log(1/rho) N) over several reports.
inline double fit_norm_constant(const std::vector<RestrictedNormReport>& reports, std::size_t n) {
  require(!reports.empty(), "fit_norm_constant: no reports");
  double sxy = 0.0, sxx = 0.0;
  for (const auto& r : reports) {
    const double x = restricted_norm_scale(r.rho, n);
    sxy += x * r.norm;
    sxx += x * x;
  }
  return sxy / sxx;
}

struct SphereGapReport {
  double rho = 0.0;
  std::size_t distance = 0;
  SphereMode mode = SphereMode::exhaustive;
  std::uint64_t visited = 0;
  SpinConfiguration reference;
  SpinConfiguration argmin;
  double min_drop = 0.0;      // min over visited s of H(ref) - H(s)
  double first_order = 0.0;   // <A ref, d> at the argmin, d = ref - s
  double second_order = 0.0;  // <d, A d> / 2 at the argmin
  double identity_residual = 0.0;  // max |drop - (first - second)| over visited points
  double field_norm = 0.0;    // ||A ref||
  double field_norm_bound = 0.0;  // 3 sqrt(N)
  double gamma = 0.0;
  double lemma_rhs = 0.0;     // rho gamma N / 2

  bool field_norm_ok() const { return field_norm <= field_norm_bound; }
  bool lemma_holds() const { return min_drop >= lemma_rhs; }

  nlohmann::json to_json() const {
    return {{"rho", rho},
            {"distance", distance},
            {"mode", to_string(mode)},
            {"visited", visited},
            {"reference_hex", reference.to_hex()},
            {"argmin_hex", argmin.to_hex()},
            {"min_drop", min_drop},
            {"first_order", first_order},
            {"second_order", second_order},
            {"identity_residual", identity_residual},
            {"field_norm", field_norm},
            {"field_norm_bound", field_norm_bound},
            {"field_norm_ok", field_norm_ok()},
            {"gamma", gamma},
            {"lemma_rhs", lemma_rhs},
            {"lemma_holds", lemma_holds()}};
  }
};

namespace detail {

/// Visits every configuration at Hamming distance exactly d from the state's
/// current configuration, passing the flipped index set. The state is
/// restored on return.
template <typename Visit>
void visit_shell(EnergyState& state, std::size_t d, Visit&& visit) {
  std::vector<std::size_t> flipped;
  flipped.reserve(d);
  const std::size_t n = state.size();
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (flipped.size() == d) {
      visit(std::as_const(state), std::as_const(flipped));
      return;
    }
    for (std::size_t i = from; i + (d - flipped.size()) <= n; ++i) {
      state.flip_unchecked(i);
      flipped.push_back(i);
      self(self, i + 1);
      flipped.pop_back();
      state.flip_unchecked(i);
    }
  };
  rec(rec, 0);
}

}  // namespace detail

/// Energy drops H(ref) - H(s) over the sphere at distance round(rho N), each
/// checked against the exact expansion <A ref, d> - <d, A d>/2.
inline SphereGapReport sphere_energy_gap(const SymmetricCoupling& a, const SpinConfiguration& reference, double rho,
                                         double gamma, SphereMode mode, std::uint64_t samples = 0,
                                         std::uint64_t seed = 0) {
  check_dimensions(a, reference);
  require(rho > 0.0, "rho must be positive");
  const std::size_t n = a.size();
  const std::size_t d = sphere_distance(rho, n);
  require(d <= n, "sphere distance exceeds N");
  require(d >= 1, "round(rho N) = 0: the sphere is the reference itself");

  SphereGapReport r;
  r.rho = rho;
  r.distance = d;
  r.mode = mode;
  r.reference = reference;
  r.gamma = gamma;
  r.lemma_rhs = rho * gamma * static_cast<double>(n) / 2.0;
  r.min_drop = std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd& m = a.matrix();
  const Eigen::VectorXd s0 = reference.to_vector();
  const Eigen::VectorXd field = m * s0;
  r.field_norm = field.norm();
  r.field_norm_bound = 3.0 * std::sqrt(static_cast<double>(n));

  EnergyState state(a, reference);
  const double e0 = state.energy();
  auto visit = [&](const EnergyState& s, const std::vector<std::size_t>& flipped) {
    double first = 0.0, quad = 0.0;
    for (std::size_t p : flipped) {
      const auto ip = static_cast<Eigen::Index>(p);
      first += 2.0 * s0(ip) * field(ip);
      for (std::size_t q : flipped) {
        const auto iq = static_cast<Eigen::Index>(q);
        quad += 4.0 * s0(ip) * s0(iq) * m(ip, iq);
      }
    }
    const double drop = e0 - s.energy();
    const double second = 0.5 * quad;
    ++r.visited;
    r.identity_residual = std::max(r.identity_residual, std::abs(drop - (first - second)));
    if (drop < r.min_drop) {
      r.min_drop = drop;
      r.first_order = first;
      r.second_order = second;
      r.argmin = s.config();
    }
  };

  if (mode == SphereMode::exhaustive) {
    require_gate(binomial(n, d) * std::pow(2.0, static_cast<double>(d)) <= kSubsetGate,
                 "sphere_energy_gap exhaustive: C(N,d) 2^d exceeds 1e7");
    detail::visit_shell(state, d, visit);
  } else {
    require(samples >= 1, "sampled sphere scan needs at least one sample");
    Rng rng(seed, 0x73706872);
    for (std::uint64_t t = 0; t < samples; ++t) {
      auto flipped = rng.subset(n, d);
      std::sort(flipped.begin(), flipped.end());
      EnergyState s = state;
      for (std::size_t i : flipped) s.flip_unchecked(i);
      visit(s, flipped);
    }
  }
  return r;
}

struct BottleneckReport {
  double beta = 0.0;
  double rho = 0.0;
  std::size_t distance = 0;
  BottleneckMode mode = BottleneckMode::exact;
  SpinConfiguration reference;
  double reference_energy = 0.0;
  double log_ratio = 0.0;         // log mu(S) - log mu(ref)
  double log_ratio_se = 0.0;      // sampled mode standard error
  double sphere_size = 0.0;       // C(N, distance)
  double sphere_max_energy = 0.0; // max over S of H (exact mode), max seen (sampled)
  double gamma = 0.0;
  double log_bound = 0.0;         // N log 2 - beta rho gamma N / 2
  std::optional<double> ball_mass;           // exact mode only
  std::optional<double> log_ball_mass;
  std::optional<double> log_conductance;     // log Phi(B), exact mode only
  std::vector<double> shell_log_mass;        // log sum over shell k of exp(beta (H - H(ref)))

  nlohmann::json to_json() const {
    nlohmann::json j{{"beta", beta},
                     {"rho", rho},
                     {"distance", distance},
                     {"mode", to_string(mode)},
                     {"reference_hex", reference.to_hex()},
                     {"reference_energy", reference_energy},
                     {"log_ratio", log_ratio},
                     {"log_ratio_se", log_ratio_se},
                     {"sphere_size", sphere_size},
                     {"sphere_max_energy", sphere_max_energy},
                     {"gamma", gamma},
                     {"log_bound", log_bound},
                     {"shell_log_mass", shell_log_mass}};
    j["ball_mass"] = ball_mass ? nlohmann::json(*ball_mass) : nlohmann::json(nullptr);
    j["log_conductance"] = log_conductance ? nlohmann::json(*log_conductance) : nlohmann::json(nullptr);
    return j;
  }
};

/// Gibbs mass of the sphere at distance round(rho N) relative to the
/// reference, the ball mass, and the ball's conductance under the heat-bath
/// kernel. Exact mode enumerates every shell (N <= 20); sampled mode draws
/// `samples` uniform points per shell and scales by the shell size.
inline BottleneckReport bottleneck_ratio(const SymmetricCoupling& a, const SpinConfiguration& reference, double beta,
                                         double rho, double gamma, BottleneckMode mode, std::uint64_t samples = 0,
                                         std::uint64_t seed = 0) {
  check_dimensions(a, reference);
  require(rho > 0.0 && rho < 0.5, "rho must lie in (0, 1/2)");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and non-negative");
  const std::size_t n = a.size();
  const std::size_t d = sphere_distance(rho, n);
  require(d >= 1, "round(rho N) = 0: the sphere is the reference itself");

  BottleneckReport r;
  r.beta = beta;
  r.rho = rho;
  r.distance = d;
  r.mode = mode;
  r.reference = reference;
  r.gamma = gamma;
  r.sphere_size = binomial(n, d);
  r.log_bound = static_cast<double>(n) * std::log(2.0) - beta * rho * gamma * static_cast<double>(n) / 2.0;
  EnergyState state(a, reference);
  r.reference_energy = state.energy();
  const double e0 = r.reference_energy;
  r.sphere_max_energy = -std::numeric_limits<double>::infinity();

  if (mode == BottleneckMode::exact) {
    require_gate(n <= kPartitionGate && n <= 20, "bottleneck_ratio exact: N exceeds 20");
    const double inv_n = 1.0 / static_cast<double>(n);
    StreamingLogSumExp ball, flow;
    for (std::size_t k = 0; k <= d; ++k) {
      StreamingLogSumExp shell;
      detail::visit_shell(state, k, [&](const EnergyState& s, const std::vector<std::size_t>& flipped) {
        const double w = beta * (s.energy() - e0);
        shell.add(w);
        if (k == d) {
          r.sphere_max_energy = std::max(r.sphere_max_energy, s.energy());
          // Outward moves flip a site that still agrees with the reference.
          std::size_t next = 0;
          for (std::size_t i = 0; i < n; ++i) {
            if (next < flipped.size() && flipped[next] == i) {
              ++next;
              continue;
            }
            flow.add(w + std::log(inv_n * heat_bath_probability(beta, s.flip_delta(i))));
          }
        }
      });
      r.shell_log_mass.push_back(shell.value());
      ball.merge(shell);
    }
    r.log_ratio = r.shell_log_mass[d];
    const double log_z = log_partition(a, beta);
    // Masses relative to the reference weight exp(beta H(ref)).
    r.log_ball_mass = ball.value() + beta * e0 - log_z;
    r.ball_mass = std::exp(*r.log_ball_mass);
    r.log_conductance = flow.value() - ball.value();
    return r;
  }

  require(samples >= 2, "sampled bottleneck needs at least two samples per shell");
  Rng rng(seed, 0x626f746c);
  for (std::size_t k = 0; k <= d; ++k) {
    const double log_size = log_binomial(n, k);
    if (k == 0) {
      r.shell_log_mass.push_back(0.0);
      continue;
    }
    std::vector<double> w(samples);
    for (std::uint64_t t = 0; t < samples; ++t) {
      EnergyState s = state;
      for (std::size_t i : rng.subset(n, k)) s.flip_unchecked(i);
      w[t] = beta * (s.energy() - e0);
      if (k == d) r.sphere_max_energy = std::max(r.sphere_max_energy, s.energy());
    }
    const double lse = log_sum_exp(w);
    const double log_mean = lse - std::log(static_cast<double>(samples));
    r.shell_log_mass.push_back(log_size + log_mean);
    if (k == d) {
      // Delta method: se(log mean) = sd(ratio) / (sqrt(m) mean(ratio)).
      double sum = 0.0, sq = 0.0;
      for (double x : w) {
        const double y = std::exp(x - lse);
        sum += y;
        sq += y * y;
      }
      const double mf = static_cast<double>(samples);
      const double mean = sum / mf;
      const double var = std::max(0.0, (sq - mf * mean * mean) / (mf - 1.0));
      r.log_ratio_se = std::sqrt(var / mf) / mean;
    }
  }
  r.log_ratio = r.shell_log_mass[d];
  return r;
}

struct PipelineParams {
  double beta = 1.0;
  double gamma = 0.1;
  double delta = 0.0;
  double rho = 0.25;
  double norm_constant = 6.0;  // C in the restricted-norm hypothesis
  std::uint64_t budget = 0;    // gapped-search evaluations; 0 means default
  std::uint64_t seed = 0;
  std::optional<SpinConfiguration> reference;  // skips the search when given
  bool exact_gap = true;       // compute t_rel exactly when N <= 20
};

struct PipelineRecord {
  PipelineParams params;
  std::size_t n = 0;
  double operator_norm = 0.0;
  bool norm_ok = false;
  RestrictedNormReport restricted;
  bool restricted_ok = false;
  GappedStateReport gapped;
  SphereGapReport sphere;
  BottleneckReport bottleneck;
  double log_phi = 0.0;            // log Phi(B_rho)
  double log_lower_bound = 0.0;    // -log(2 Phi(B_rho)) <= log t_rel
  std::optional<double> t_rel;
  std::optional<bool> cheeger_consistent;  // 1/(2 Phi) <= t_rel
  bool hypotheses_met = false;
  double c_prime = 0.0;            // beta min_drop / N - log 2
  bool exponential_certificate = false;

  nlohmann::json to_json() const {
    nlohmann::json j{{"n", n},
                     {"beta", params.beta},
                     {"gamma", params.gamma},
                     {"delta", params.delta},
                     {"rho", params.rho},
                     {"operator_norm", operator_norm},
                     {"norm_ok", norm_ok},
                     {"restricted", restricted.to_json()},
                     {"restricted_ok", restricted_ok},
                     {"gapped", gapped.to_json()},
                     {"sphere", sphere.to_json()},
                     {"bottleneck", bottleneck.to_json()},
                     {"log_phi", log_phi},
                     {"log_lower_bound", log_lower_bound},
                     {"hypotheses_met", hypotheses_met},
                     {"c_prime", c_prime},
                     {"exponential_certificate", exponential_certificate}};
    j["t_rel"] = t_rel ? nlohmann::json(*t_rel) : nlohmann::json(nullptr);
    j["cheeger_consistent"] = cheeger_consistent ? nlohmann::json(*cheeger_consistent) : nlohmann::json(nullptr);
    return j;
  }

  std::string summary() const {
    std::ostringstream o;
    auto flag = [](bool ok) { return ok ? "ok" : "FAILED"; };
    o << "N=" << n << " beta=" << format_double(params.beta) << " gamma=" << format_double(params.gamma)
      << " delta=" << format_double(params.delta) << " rho=" << format_double(params.rho) << '\n';
    o << "beta > 0: " << flag(params.beta > 0.0) << '\n';
    o << "operator norm " << format_double(operator_norm) << " <= 3, margin " << format_double(3.0 - operator_norm)
      << " [" << flag(norm_ok) << "]\n";
    o << "restricted norm " << format_double(restricted.norm) << " <= " << format_double(restricted.bound_rhs)
      << " (" << to_string(restricted.mode) << "), margin " << format_double(restricted.bound_rhs - restricted.norm)
      << " [" << flag(restricted_ok) << "]\n";
    o << "gapped: below_count " << gapped.below_count << " <= delta N = "
      << format_double(params.delta * static_cast<double>(n)) << ", min_gap " << format_double(gapped.min_gap())
      << " [" << flag(gapped.verdict) << "]\n";
    o << "field norm " << format_double(sphere.field_norm) << " <= 3 sqrt(N) = " << format_double(sphere.field_norm_bound)
      << " [" << flag(sphere.field_norm_ok()) << "]\n";
    o << "sphere (d=" << sphere.distance << ", " << to_string(sphere.mode) << "): min_drop "
      << format_double(sphere.min_drop) << " vs rho gamma N / 2 = " << format_double(sphere.lemma_rhs) << ", margin "
      << format_double(sphere.min_drop - sphere.lemma_rhs) << " [" << flag(sphere.lemma_holds()) << "]\n";
    o << "bottleneck: log ratio " << format_double(bottleneck.log_ratio) << " vs bound "
      << format_double(bottleneck.log_bound) << ", ball mass "
      << (bottleneck.ball_mass ? format_double(*bottleneck.ball_mass) : std::string("n/a")) << '\n';
    o << "log Phi(B) " << format_double(log_phi) << ", log t_rel lower bound " << format_double(log_lower_bound) << '\n';
    if (t_rel)
      o << "exact t_rel " << format_double(*t_rel) << " [" << flag(cheeger_consistent.value_or(false)) << "]\n";
    o << "hypotheses " << (hypotheses_met ? "met" : "unmet") << "; c' = " << format_double(c_prime)
      << "; exponential certificate " << (exponential_certificate ? "yes" : "no") << '\n';
    return o.str();
  }
};

/// Gapped state -> hypothesis checks -> sphere drops -> bottleneck -> ball
/// conductance -> optional exact t_rel. Failed hypotheses are reported in
/// the record, not thrown.
inline PipelineRecord theorem_pipeline(const SymmetricCoupling& a, const PipelineParams& params) {
  check_gapped_parameters(params.gamma, params.delta);
  const std::size_t n = a.size();
  require_gate(n <= 20, "theorem_pipeline: N exceeds 20");
  PipelineRecord rec;
  rec.params = params;
  rec.n = n;

  rec.operator_norm = operator_norm(a.matrix(), 1e-10, params.seed);
  rec.norm_ok = rec.operator_norm <= 3.0;

  double subsets = 0.0;
  const auto k = static_cast<std::size_t>(std::floor(params.rho * static_cast<double>(n) + 1e-9));
  for (std::size_t s = 1; s <= k; ++s) subsets += binomial(n, s);
  rec.restricted = restricted_norm(a, params.rho, subsets <= kSubsetGate ? SubsetMode::exact : SubsetMode::heuristic,
                                   20, params.seed, params.norm_constant);
  rec.restricted_ok = rec.restricted.norm <= rec.restricted.bound_rhs;

  if (params.reference) {
    rec.gapped = verify_gapped(a, *params.reference, params.gamma, params.delta);
  } else {
    SearchOptions opt;
    opt.budget = params.budget;
    opt.seed = params.seed;
    rec.gapped = search_gapped(a, params.gamma, params.delta, opt);
  }
  const SpinConfiguration& ref = rec.gapped.config;

  const std::size_t d = sphere_distance(params.rho, n);
  const bool exhaustive = binomial(n, d) * std::pow(2.0, static_cast<double>(d)) <= kSubsetGate;
  rec.sphere = sphere_energy_gap(a, ref, params.rho, params.gamma,
                                 exhaustive ? SphereMode::exhaustive : SphereMode::sampled, 100000, params.seed);
  rec.bottleneck = bottleneck_ratio(a, ref, params.beta, params.rho, params.gamma, BottleneckMode::exact);
  rec.log_phi = *rec.bottleneck.log_conductance;
  rec.log_lower_bound = -(std::log(2.0) + rec.log_phi);

  if (params.exact_gap && params.beta > 0.0) {
    const auto p = build_transition(a, params.beta);
    const auto report = spectral_gap(p, n <= kDenseGate ? SpectralMethod::dense : SpectralMethod::iterative);
    rec.t_rel = report.t_rel;
    rec.cheeger_consistent = rec.log_lower_bound <= std::log(report.t_rel) + 1e-9;
  }

  rec.hypotheses_met = params.beta > 0.0 && rec.norm_ok && rec.restricted_ok && rec.gapped.verdict;
  rec.c_prime = params.beta * rec.sphere.min_drop / static_cast<double>(n) - std::log(2.0);
  rec.exponential_certificate = rec.hypotheses_met && rec.sphere.mode == SphereMode::exhaustive && rec.c_prime > 0.0;
  return rec;
}

}  // namespace skglass
