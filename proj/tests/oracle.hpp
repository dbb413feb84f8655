#pragma once

// Brute-force reference implementations for tests. Nothing here includes the
// library headers: inputs are plain Eigen matrices and int spin vectors, and
// every routine is a direct transcription of its definition.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Gate {
  static constexpr int max_dense_sites = 14;
  static constexpr int max_enumeration_sites = 20;
  static constexpr double max_subsets = 1e7;
};

inline void refuse_unless(bool ok, const char* what) {
  if (!ok) throw std::out_of_range(what);
}

inline std::vector<int> spins_of(std::uint64_t x, int n) {
  std::vector<int> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = ((x >> i) & 1U) ? 1 : -1;
  return s;
}

/// H = sum_ij g_ij s_i s_j / sqrt(N) straight from the raw grid G.
inline double naive_energy_raw(const Eigen::MatrixXd& g, const std::vector<int>& s) {
  const int n = static_cast<int>(g.rows());
  double h = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h += g(i, j) * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
  return h / std::sqrt(static_cast<double>(n));
}

/// H = (1/2) sum_ij A_ij s_i s_j.
inline double naive_energy(const Eigen::MatrixXd& a, const std::vector<int>& s) {
  const int n = static_cast<int>(a.rows());
  double h = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h += a(i, j) * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
  return 0.5 * h;
}

/// L_i = s_i (H(s) - H(s flipped at i)) / 2, by two full energy evaluations.
inline std::vector<double> naive_local_fields(const Eigen::MatrixXd& a, const std::vector<int>& s) {
  const double h = naive_energy(a, s);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<int> t = s;
    t[i] = -t[i];
    out[i] = s[i] * (h - naive_energy(a, t)) / 2.0;
  }
  return out;
}

/// min_i s_i L_i, with L_i = sum_{j != i} A_ij s_j.
inline double naive_min_gap(const Eigen::MatrixXd& a, const std::vector<int>& s) {
  const int n = static_cast<int>(a.rows());
  double best = INFINITY;
  for (int i = 0; i < n; ++i) {
    double field = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) field += a(i, j) * s[static_cast<std::size_t>(j)];
    best = std::min(best, s[static_cast<std::size_t>(i)] * field);
  }
  return best;
}

struct Maximin {
  double value = -INFINITY;
  std::uint64_t argmax = 0;
};

/// max over all 2^N configurations of min_i s_i L_i.
inline Maximin exhaustive_maximin(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  refuse_unless(n <= Gate::max_enumeration_sites, "exhaustive_maximin: N over gate");
  Maximin m;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
    const double g = naive_min_gap(a, spins_of(x, n));
    if (g > m.value) m = {g, x};
  }
  return m;
}

/// Indices x of every local maximum (min_i s_i L_i >= 0), both signs included.
inline std::vector<std::uint64_t> brute_force_local_maxima(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  refuse_unless(n <= Gate::max_enumeration_sites, "brute_force_local_maxima: N over gate");
  std::vector<std::uint64_t> out;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x)
    if (naive_min_gap(a, spins_of(x, n)) >= 0.0) out.push_back(x);
  return out;
}

inline double naive_log_partition(const Eigen::MatrixXd& a, double beta) {
  const int n = static_cast<int>(a.rows());
  refuse_unless(n <= Gate::max_enumeration_sites, "naive_log_partition: N over gate");
  std::vector<double> e;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) e.push_back(beta * naive_energy(a, spins_of(x, n)));
  double m = -INFINITY;
  for (double v : e) m = std::max(m, v);
  double s = 0.0;
  for (double v : e) s += std::exp(v - m);
  return m + std::log(s);
}

struct ChainAnalysis {
  Eigen::MatrixXd transition;    // dense P, states indexed by x (bit i set <=> s_i = +1)
  Eigen::VectorXd stationary;    // e^{beta H} / Z
  Eigen::VectorXd spectrum;      // eigenvalues of P, ascending
};

/// Dense heat-bath kernel, Gibbs vector, and full spectrum through the
/// similarity transform D^{1/2} P D^{-1/2}.
inline ChainAnalysis dense_chain_analysis(const Eigen::MatrixXd& a, double beta) {
  const int n = static_cast<int>(a.rows());
  refuse_unless(n <= 10, "dense_chain_analysis: N over gate");
  const std::uint64_t states = std::uint64_t{1} << n;
  const auto dim = static_cast<Eigen::Index>(states);
  Eigen::VectorXd h(dim);
  for (std::uint64_t x = 0; x < states; ++x) h(static_cast<Eigen::Index>(x)) = naive_energy(a, spins_of(x, n));

  ChainAnalysis out;
  out.transition = Eigen::MatrixXd::Zero(dim, dim);
  for (std::uint64_t x = 0; x < states; ++x) {
    double stay = 1.0;
    for (int i = 0; i < n; ++i) {
      const std::uint64_t y = x ^ (std::uint64_t{1} << i);
      const double delta = h(static_cast<Eigen::Index>(y)) - h(static_cast<Eigen::Index>(x));
      const double p = (1.0 / n) / (1.0 + std::exp(-beta * delta));
      out.transition(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = p;
      stay -= p;
    }
    out.transition(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) = stay;
  }
  const double m = (beta * h).maxCoeff();
  Eigen::VectorXd w = (beta * h).array() - m;
  w = w.array().exp();
  out.stationary = w / w.sum();

  Eigen::VectorXd root = out.stationary.array().sqrt();
  Eigen::MatrixXd sym = root.asDiagonal() * out.transition * root.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  out.spectrum = solver.eigenvalues();
  return out;
}

struct HypercubeForms {
  double gap;
  std::vector<double> eigenvalues;      // 1 - k/N for k = 0..N
  std::vector<double> multiplicities;   // C(N, k)
};

inline double choose(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

/// Beta = 0 heat-bath walk: uniform site, flip with probability 1/2.
inline HypercubeForms hypercube_closed_forms(int n) {
  HypercubeForms f{1.0 / n, {}, {}};
  for (int k = 0; k <= n; ++k) {
    f.eigenvalues.push_back(1.0 - static_cast<double>(k) / n);
    f.multiplicities.push_back(choose(n, k));
  }
  return f;
}

/// Expected number of steps for the beta = 0 walk started at distance 0 to
/// reach Hamming distance `target`: the distance is a birth-death chain
/// (up (N-d)/(2N), down d/(2N)); solve the absorbing linear system.
inline double hypercube_expected_exit(int n, int target) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(target, target);
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(target);
  for (int d = 0; d < target; ++d) {
    const double up = (n - d) / (2.0 * n), down = d / (2.0 * n);
    m(d, d) = up + down;
    if (d + 1 < target) m(d, d + 1) = -up;
    if (d > 0) m(d, d - 1) = -down;
  }
  return m.fullPivLu().solve(rhs)(0);
}

/// max over subsets S with 1 <= |S| <= k of the largest |eigenvalue| of A_SS.
inline double brute_restricted_norm(const Eigen::MatrixXd& a, int k) {
  const int n = static_cast<int>(a.rows());
  double count = 0.0;
  for (int s = 1; s <= k; ++s) count += choose(n, s);
  refuse_unless(count <= Gate::max_subsets, "brute_restricted_norm: too many subsets");
  double best = 0.0;
  std::vector<int> idx;
  auto visit = [&](auto&& self, int from) -> void {
    if (!idx.empty()) {
      const int m = static_cast<int>(idx.size());
      Eigen::MatrixXd sub(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) sub(i, j) = a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
      best = std::max(best, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    if (static_cast<int>(idx.size()) == k) return;
    for (int i = from; i < n; ++i) {
      idx.push_back(i);
      self(self, i + 1);
      idx.pop_back();
    }
  };
  visit(visit, 0);
  return best;
}

inline int hamming(std::uint64_t x, std::uint64_t y) {
  int d = 0;
  for (std::uint64_t z = x ^ y; z; z >>= 1) d += static_cast<int>(z & 1U);
  return d;
}

struct SphereScan {
  double log_ratio = 0.0;   // log sum_{d(x, ref) = r} e^{beta (H(x) - H(ref))}
  double max_energy = -INFINITY;
  double count = 0.0;
};

/// Scans all 2^N states for the sphere of radius r around `ref`.
inline SphereScan naive_sphere(const Eigen::MatrixXd& a, std::uint64_t ref, int r, double beta) {
  const int n = static_cast<int>(a.rows());
  refuse_unless(n <= Gate::max_enumeration_sites, "naive_sphere: N over gate");
  const double h0 = naive_energy(a, spins_of(ref, n));
  std::vector<double> e;
  SphereScan out;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
    if (hamming(x, ref) != r) continue;
    const double h = naive_energy(a, spins_of(x, n));
    out.max_energy = std::max(out.max_energy, h);
    e.push_back(beta * (h - h0));
  }
  out.count = static_cast<double>(e.size());
  double m = -INFINITY;
  for (double v : e) m = std::max(m, v);
  double s = 0.0;
  for (double v : e) s += std::exp(v - m);
  out.log_ratio = m + std::log(s);
  return out;
}

/// Q(B, B^c) / min(pi(B), pi(B^c)) for the heat-bath chain and the Hamming
/// ball B of radius r around `center`, from the definitions.
inline double naive_ball_conductance(const Eigen::MatrixXd& a, double beta, std::uint64_t center, int r) {
  const int n = static_cast<int>(a.rows());
  refuse_unless(n <= 14, "naive_ball_conductance: N over gate");
  const std::uint64_t states = std::uint64_t{1} << n;
  std::vector<double> h(states);
  for (std::uint64_t x = 0; x < states; ++x) h[x] = naive_energy(a, spins_of(x, n));
  double m = -INFINITY;
  for (double v : h) m = std::max(m, beta * v);
  std::vector<double> pi(states);
  double z = 0.0;
  for (std::uint64_t x = 0; x < states; ++x) z += pi[x] = std::exp(beta * h[x] - m);
  double mass = 0.0, flow = 0.0;
  for (std::uint64_t x = 0; x < states; ++x) {
    pi[x] /= z;
    if (hamming(x, center) > r) continue;
    mass += pi[x];
    for (int i = 0; i < n; ++i) {
      const std::uint64_t y = x ^ (std::uint64_t{1} << i);
      if (hamming(y, center) <= r) continue;
      flow += pi[x] * (1.0 / n) / (1.0 + std::exp(-beta * (h[y] - h[x])));
    }
  }
  return flow / std::min(mass, 1.0 - mass);
}

}  // namespace oracle
