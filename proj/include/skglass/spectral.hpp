#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "json.hpp"

#include "skglass/dynamics.hpp"
#include "skglass/model.hpp"
#include "skglass/numerics.hpp"

namespace skglass {

inline constexpr std::size_t kTransitionGate = 20;
inline constexpr std::size_t kDenseGate = 12;
inline constexpr std::size_t kMixingGate = 12;
inline constexpr std::size_t kCheegerGate = 10;

/// Exact heat-bath Glauber kernel on all 2^N states. State x has site i at +1
/// iff bit i of x is set. Only the N flip probabilities per row are stored.
class TransitionMatrix {
 public:
  std::size_t sites() const { return n_; }
  std::size_t states() const { return energies_.size(); }
  double beta() const { return beta_; }
  double energy(std::uint64_t x) const { return energies_[x]; }
  const std::vector<double>& energies() const { return energies_; }
  double log_partition() const { return log_z_; }

  /// P(x, x ^ (1 << i))
  double flip(std::uint64_t x, std::size_t i) const { return flips_[x * n_ + i]; }
  /// P(x, x)
  double holding(std::uint64_t x) const { return holding_[x]; }

  double log_stationary(std::uint64_t x) const { return beta_ * energies_[x] - log_z_; }
  double stationary(std::uint64_t x) const { return std::exp(log_stationary(x)); }
  double log_min_stationary() const {
    return beta_ * *std::min_element(energies_.begin(), energies_.end()) - log_z_;
  }

  Eigen::VectorXd stationary_vector() const {
    Eigen::VectorXd pi(static_cast<Eigen::Index>(states()));
    for (std::uint64_t x = 0; x < states(); ++x) pi(static_cast<Eigen::Index>(x)) = stationary(x);
    return pi;
  }

  /// S(x, y) = sqrt(P(x,y) P(y,x)), the kernel of D^{1/2} P D^{-1/2}.
  double symmetric(std::uint64_t x, std::size_t i) const { return sym_[x * n_ + i]; }

  /// out = S v
  void apply_symmetric(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
    out.resize(v.size());
    for (std::uint64_t x = 0; x < states(); ++x) {
      double acc = holding_[x] * v(static_cast<Eigen::Index>(x));
      for (std::size_t i = 0; i < n_; ++i)
        acc += sym_[x * n_ + i] * v(static_cast<Eigen::Index>(x ^ (std::uint64_t{1} << i)));
      out(static_cast<Eigen::Index>(x)) = acc;
    }
  }

  /// row vector mu -> mu P
  Eigen::RowVectorXd apply_left(const Eigen::RowVectorXd& mu) const {
    Eigen::RowVectorXd out(mu.size());
    for (std::uint64_t y = 0; y < states(); ++y) {
      double acc = mu(static_cast<Eigen::Index>(y)) * holding_[y];
      for (std::size_t i = 0; i < n_; ++i) {
        const std::uint64_t x = y ^ (std::uint64_t{1} << i);
        acc += mu(static_cast<Eigen::Index>(x)) * flip(x, i);
      }
      out(static_cast<Eigen::Index>(y)) = acc;
    }
    return out;
  }

  /// y^T (I - S) y as a sum of squares over edges, accurate even for tiny gaps.
  double dirichlet_form(const Eigen::VectorXd& y) const {
    double total = 0.0;
    for (std::uint64_t x = 0; x < states(); ++x) {
      for (std::size_t i = 0; i < n_; ++i) {
        const std::uint64_t z = x ^ (std::uint64_t{1} << i);
        if (z < x) continue;
        const double r = std::exp(0.25 * beta_ * (energies_[z] - energies_[x]));
        const double diff = y(static_cast<Eigen::Index>(x)) * r - y(static_cast<Eigen::Index>(z)) / r;
        total += sym_[x * n_ + i] * diff * diff;
      }
    }
    return total;
  }

  double max_row_sum_error() const {
    double worst = 0.0;
    for (std::uint64_t x = 0; x < states(); ++x) {
      double s = holding_[x];
      for (std::size_t i = 0; i < n_; ++i) s += flip(x, i);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  /// max |pi(x) P(x,y) - pi(y) P(y,x)| over all edges.
  double reversibility_residual() const {
    double worst = 0.0;
    for (std::uint64_t x = 0; x < states(); ++x)
      for (std::size_t i = 0; i < n_; ++i) {
        const std::uint64_t y = x ^ (std::uint64_t{1} << i);
        worst = std::max(worst, std::abs(stationary(x) * flip(x, i) - stationary(y) * flip(y, i)));
      }
    return worst;
  }

  Eigen::SparseMatrix<double, Eigen::RowMajor> sparse() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(states() * (n_ + 1));
    for (std::uint64_t x = 0; x < states(); ++x) {
      const auto r = static_cast<int>(x);
      t.emplace_back(r, r, holding_[x]);
      for (std::size_t i = 0; i < n_; ++i) t.emplace_back(r, static_cast<int>(x ^ (std::uint64_t{1} << i)), flip(x, i));
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> p(static_cast<Eigen::Index>(states()),
                                                   static_cast<Eigen::Index>(states()));
    p.setFromTriplets(t.begin(), t.end());
    return p;
  }

  Eigen::MatrixXd dense() const {
    require_gate(n_ <= kDenseGate, "dense transition matrix: N exceeds 12");
    return Eigen::MatrixXd(sparse());
  }

 private:
  friend TransitionMatrix build_transition(const SymmetricCoupling& a, double beta);

  std::size_t n_ = 0;
  double beta_ = 0.0;
  double log_z_ = 0.0;
  std::vector<double> energies_;
  std::vector<double> flips_;
  std::vector<double> sym_;
  std::vector<double> holding_;
};

inline TransitionMatrix build_transition(const SymmetricCoupling& a, double beta) {
  const std::size_t n = a.size();
  require_gate(n <= kTransitionGate, "build_transition: N=" + std::to_string(n) + " exceeds the gate N <= 20");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and non-negative");
  TransitionMatrix p;
  p.n_ = n;
  p.beta_ = beta;
  const std::uint64_t states = std::uint64_t{1} << n;
  const std::uint64_t mask = states - 1;
  p.energies_.assign(states, 0.0);
  visit_half_gray(a, [&](const EnergyState& s) {
    const std::uint64_t x = s.config().to_index();
    p.energies_[x] = s.energy();
    p.energies_[~x & mask] = s.energy();
  });
  StreamingLogSumExp lse;
  for (double e : p.energies_) lse.add(beta * e);
  p.log_z_ = lse.value();

  const double inv_n = 1.0 / static_cast<double>(n);
  p.flips_.assign(states * n, 0.0);
  p.sym_.assign(states * n, 0.0);
  p.holding_.assign(states, 0.0);
  for (std::uint64_t x = 0; x < states; ++x) {
    double out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = p.energies_[x ^ (std::uint64_t{1} << i)] - p.energies_[x];
      const double q = inv_n * heat_bath_probability(beta, delta);
      p.flips_[x * n + i] = q;
      p.sym_[x * n + i] = inv_n / (2.0 * std::cosh(0.5 * beta * delta));
      out += q;
    }
    p.holding_[x] = 1.0 - out;
  }
  return p;
}

enum class SpectralMethod { dense, iterative };

inline std::string to_string(SpectralMethod m) { return m == SpectralMethod::dense ? "dense" : "iterative"; }

struct SpectralReport {
  double gap = 0.0;  // 1 - lambda_2
  double t_rel = 0.0;
  SpectralMethod method = SpectralMethod::dense;
  double residual = 0.0;  // ||S v - lambda v|| for the returned eigenvector
  std::size_t n = 0;
  double beta = 0.0;
  std::vector<double> spectrum;  // all eigenvalues of P ascending, dense method with N <= 10 only

  nlohmann::json to_json() const {
    return {{"n", n},           {"beta", beta},     {"gap", gap},
            {"t_rel", t_rel},   {"lambda2", 1.0 - gap}, {"method", to_string(method)},
            {"residual", residual}};
  }
};

namespace detail {

/// Residual of (theta, v) against S.
inline double eigen_residual(const TransitionMatrix& p, const Eigen::VectorXd& v, double theta) {
  Eigen::VectorXd sv;
  p.apply_symmetric(v, sv);
  return (sv - theta * v).norm();
}

inline SpectralReport finish_report(const TransitionMatrix& p, Eigen::VectorXd v, SpectralMethod method) {
  v.normalize();
  const double gap = p.dirichlet_form(v);
  SpectralReport r;
  r.gap = gap;
  r.t_rel = 1.0 / gap;
  r.method = method;
  r.residual = eigen_residual(p, v, 1.0 - gap);
  r.n = p.sites();
  r.beta = p.beta();
  return r;
}

/// Eigenvector of symmetric m for the eigenvalue nearest mu, orthogonal to
/// `deflate` when given.
inline Eigen::VectorXd inverse_iteration(const Eigen::MatrixXd& m, double mu, const Eigen::VectorXd* deflate) {
  const Eigen::Index n = m.rows();
  const double shift = mu + 1e-10 * std::max(1.0, std::abs(mu));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m - shift * Eigen::MatrixXd::Identity(n, n));
  Rng rng(0x696e7669);
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = rng.normal();
  for (int it = 0; it < 4; ++it) {
    if (deflate) v -= deflate->dot(v) * *deflate;
    v = lu.solve(v);
    if (deflate) v -= deflate->dot(v) * *deflate;
    v.normalize();
  }
  return v;
}

/// Dense solve split by the global spin-flip symmetry x -> ~x: S commutes with
/// it, so S is block diagonal in the even and odd sectors, each 2^{N-1} wide.
inline SpectralReport dense_gap(const TransitionMatrix& p, bool keep_spectrum) {
  const std::size_t n = p.sites();
  require_gate(n <= kDenseGate, "dense spectral gap: N exceeds 12");
  const std::uint64_t states = p.states();
  const std::uint64_t mask = states - 1;
  const auto half = static_cast<Eigen::Index>(states / 2);
  // Representatives are the states with bit 0 set; k = x >> 1.
  Eigen::MatrixXd even = Eigen::MatrixXd::Zero(half, half);
  Eigen::MatrixXd odd = Eigen::MatrixXd::Zero(half, half);
  for (std::uint64_t x = 1; x < states; x += 2) {
    const auto k = static_cast<Eigen::Index>(x >> 1);
    even(k, k) += p.holding(x);
    odd(k, k) += p.holding(x);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t y = x ^ (std::uint64_t{1} << i);
      const double s = p.symmetric(x, i);
      if (y & 1U) {
        even(k, static_cast<Eigen::Index>(y >> 1)) += s;
        odd(k, static_cast<Eigen::Index>(y >> 1)) += s;
      } else {
        const auto m = static_cast<Eigen::Index>((~y & mask) >> 1);
        even(k, m) += s;
        odd(k, m) -= s;
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> se(even, Eigen::EigenvaluesOnly), so(odd, Eigen::EigenvaluesOnly);
  require(se.info() == Eigen::Success && so.info() == Eigen::Success, "dense eigensolver failed");
  const auto& ev = se.eigenvalues();
  const auto& ov = so.eigenvalues();
  // The top even eigenvalue is 1 (stationary); lambda_2 is the next one or the top odd.
  const double even2 = half >= 2 ? ev(half - 2) : -std::numeric_limits<double>::infinity();
  const double odd1 = ov(half - 1);
  const bool from_odd = odd1 >= even2;
  Eigen::VectorXd root(half);
  for (std::uint64_t x = 1; x < states; x += 2)
    root(static_cast<Eigen::Index>(x >> 1)) = std::exp(0.5 * p.log_stationary(x));
  root.normalize();
  const Eigen::VectorXd w = from_odd ? inverse_iteration(odd, odd1, nullptr)
                                     : inverse_iteration(even, even2, &root);
  Eigen::VectorXd v(static_cast<Eigen::Index>(states));
  for (std::uint64_t x = 1; x < states; x += 2) {
    const double c = w(static_cast<Eigen::Index>(x >> 1));
    v(static_cast<Eigen::Index>(x)) = c;
    v(static_cast<Eigen::Index>(~x & mask)) = from_odd ? -c : c;
  }
  SpectralReport r = finish_report(p, std::move(v), SpectralMethod::dense);
  if (keep_spectrum) {
    r.spectrum.assign(ev.data(), ev.data() + half);
    r.spectrum.insert(r.spectrum.end(), ov.data(), ov.data() + half);
    std::sort(r.spectrum.begin(), r.spectrum.end());
  }
  return r;
}

/// Thick-restart Lanczos for the top eigenpair of S on the complement of
/// sqrt(pi), fully reorthogonalized.
inline SpectralReport iterative_gap(const TransitionMatrix& p, double tol, std::size_t max_restarts) {
  const auto dim = static_cast<Eigen::Index>(p.states());
  Eigen::VectorXd u(dim);
  for (Eigen::Index x = 0; x < dim; ++x) u(x) = std::exp(0.5 * p.log_stationary(static_cast<std::uint64_t>(x)));
  u.normalize();
  const Eigen::Index m = std::min<Eigen::Index>(dim >= (Eigen::Index{1} << 18) ? 24 : 40, dim - 1);
  const Eigen::Index keep = std::max<Eigen::Index>(1, m / 3);

  Eigen::MatrixXd v(dim, m + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  auto project_out = [&](Eigen::VectorXd& w, Eigen::Index cols) {
    for (int pass = 0; pass < 2; ++pass) {
      w -= u.dot(w) * u;
      if (cols > 0) w -= v.leftCols(cols) * (v.leftCols(cols).transpose() * w);
    }
  };

  Rng rng(0x6c616e63);
  Eigen::VectorXd start(dim);
  for (Eigen::Index x = 0; x < dim; ++x) start(x) = rng.normal();
  project_out(start, 0);
  v.col(0) = start.normalized();

  Eigen::Index filled = 0;  // columns of v whose row/column of h is known
  double best_theta = 0.0, best_residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(dim), ritz(dim);
  for (std::size_t cycle = 0; cycle < max_restarts; ++cycle) {
    Eigen::Index size = m;
    for (Eigen::Index j = filled; j < m; ++j) {
      p.apply_symmetric(v.col(j), w);
      const Eigen::VectorXd coeff = v.leftCols(j + 1).transpose() * w;
      h.col(j).head(j + 1) = coeff;
      h.row(j).head(j + 1) = coeff.transpose();
      w -= v.leftCols(j + 1) * coeff;
      project_out(w, j + 1);
      const double norm = w.norm();
      if (norm < 1e-13) {
        size = j + 1;
        break;
      }
      v.col(j + 1) = w / norm;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.topLeftCorner(size, size));
    const double theta = es.eigenvalues()(size - 1);
    ritz = v.leftCols(size) * es.eigenvectors().col(size - 1);
    ritz.normalize();
    p.apply_symmetric(ritz, w);
    Eigen::VectorXd r = w - theta * ritz;
    const double res = r.norm();
    best_theta = theta;
    best_residual = res;
    if (res <= tol || size < m) return finish_report(p, ritz, SpectralMethod::iterative);

    const Eigen::Index k = std::min(keep, size - 1);
    const Eigen::MatrixXd y = es.eigenvectors().rightCols(k);
    const Eigen::MatrixXd kept = v.leftCols(size) * y;
    v.leftCols(k) = kept;
    h.setZero();
    h.topLeftCorner(k, k) = es.eigenvalues().tail(k).asDiagonal();
    project_out(r, k);
    v.col(k) = r.normalized();
    filled = k;
    // Column k of h is recomputed in the next cycle together with the
    // couplings h(0..k-1, k) from the kept Ritz vectors.
  }
  throw ConvergenceError("spectral gap: Lanczos did not converge", 1.0 - best_theta, best_residual);
}

}  // namespace detail

/// Spectral gap 1 - lambda_2 of the (positive semidefinite) heat-bath kernel.
/// The gap is taken as the Dirichlet-form Rayleigh quotient of the computed
/// eigenvector, which keeps relative accuracy when the gap is tiny.
inline SpectralReport spectral_gap(const TransitionMatrix& p, SpectralMethod method = SpectralMethod::dense,
                                   double tol = 1e-10, std::size_t max_restarts = 20000) {
  if (method == SpectralMethod::dense) return detail::dense_gap(p, p.sites() <= 10);
  return detail::iterative_gap(p, tol, max_restarts);
}

struct MixingCurve {
  std::vector<std::pair<std::uint64_t, double>> points;  // (t, d(t)), increasing t
  double epsilon = 0.25;
  std::optional<std::uint64_t> t_mix;
  bool censored = false;
  std::uint64_t cap = 0;
  double pi_min = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [t, d] : points) pts.push_back({t, d});
    nlohmann::json j{{"epsilon", epsilon}, {"censored", censored}, {"cap", cap}, {"pi_min", pi_min}, {"points", pts}};
    if (t_mix) j["t_mix"] = *t_mix;
    else j["t_mix"] = nullptr;
    return j;
  }

  void write_csv(std::ostream& out) const {
    out << "t,d_t\n";
    for (const auto& [t, d] : points) out << t << ',' << format_double(d) << '\n';
  }
};

namespace detail {

/// max_x TV(M(x, .), pi)
inline double worst_tv(const Eigen::MatrixXd& m, const Eigen::RowVectorXd& pi) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < m.rows(); ++x) worst = std::max(worst, 0.5 * (m.row(x) - pi).cwiseAbs().sum());
  return worst;
}

}  // namespace detail

/// Worst-case total-variation curve d(t) = max_x ||P^t(x, .) - pi||_TV and
/// t_mix(eps). Early times are stepped one at a time; beyond that, powers
/// P^{2^k} locate the crossing by doubling and then binary lifting, so the
/// curve is exact at every recorded t but sparse at large t.
inline MixingCurve mixing_time_exact(const TransitionMatrix& p, double epsilon = 0.25,
                                     std::uint64_t cap = std::uint64_t{1} << 40) {
  require_gate(p.sites() <= kMixingGate, "mixing_time_exact: N exceeds 12");
  require(epsilon > 0.0 && epsilon < 0.5, "epsilon must lie in (0, 1/2)");
  require(cap >= 1, "cap must be positive");
  const auto dim = static_cast<Eigen::Index>(p.states());
  const Eigen::RowVectorXd pi = p.stationary_vector().transpose();
  const auto sparse = p.sparse();

  MixingCurve curve;
  curve.epsilon = epsilon;
  curve.cap = cap;
  curve.pi_min = pi.minCoeff();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
  curve.points.emplace_back(0, detail::worst_tv(m, pi));

  const double work = static_cast<double>(dim) * static_cast<double>(dim) * static_cast<double>(p.sites() + 1);
  const auto linear = static_cast<std::uint64_t>(std::clamp(2e9 / work, 16.0, 4096.0));
  std::uint64_t t = 0;
  for (; t < std::min(linear, cap);) {
    m = m * sparse;
    ++t;
    const double d = detail::worst_tv(m, pi);
    curve.points.emplace_back(t, d);
    if (d <= epsilon) {
      curve.t_mix = t;
      return curve;
    }
  }
  if (t >= cap) {
    curve.censored = true;
    return curve;
  }

  // Doubling: find k with d(t + 2^k) <= eps.
  std::vector<Eigen::MatrixXd> powers{Eigen::MatrixXd(sparse)};
  while (true) {
    const std::uint64_t step = std::uint64_t{1} << (powers.size() - 1);
    if (t + step > cap) {
      curve.censored = true;
      break;
    }
    const Eigen::MatrixXd trial = m * powers.back();
    const double d = detail::worst_tv(trial, pi);
    curve.points.emplace_back(t + step, d);
    if (d <= epsilon) break;
    powers.push_back(powers.back() * powers.back());
  }
  if (!curve.censored) {
    // Binary lifting below the first passing power.
    for (std::size_t k = powers.size() - 1; k-- > 0;) {
      const Eigen::MatrixXd trial = m * powers[k];
      const double d = detail::worst_tv(trial, pi);
      const std::uint64_t at = t + (std::uint64_t{1} << k);
      curve.points.emplace_back(at, d);
      if (d > epsilon) {
        m = trial;
        t = at;
      }
    }
    curve.t_mix = t + 1;
  }
  std::sort(curve.points.begin(), curve.points.end());
  curve.points.erase(std::unique(curve.points.begin(), curve.points.end(),
                                 [](const auto& a, const auto& b) { return a.first == b.first; }),
                     curve.points.end());
  return curve;
}

struct Conductance {
  double phi = 0.0;
  double mass = 0.0;  // pi of the set actually measured
  double flow = 0.0;  // Q(S, S^c)
  bool complemented = false;
};

/// Phi(S) = Q(S, S^c) / pi(S), Q(x,y) = pi(x) P(x,y). If pi(S) > 1/2 the
/// complement is measured instead and `complemented` is set.
inline Conductance conductance(const TransitionMatrix& p, const std::vector<char>& in_set) {
  require(in_set.size() == p.states(), "conductance: membership vector has the wrong length");
  std::size_t count = 0;
  for (char c : in_set) count += c ? 1 : 0;
  require(count > 0 && count < p.states(), "conductance: the set must be non-empty and proper");
  double mass = 0.0, rest = 0.0, flow = 0.0;
  for (std::uint64_t x = 0; x < p.states(); ++x) {
    const double px = p.stationary(x);
    if (!in_set[x]) {
      rest += px;
      continue;
    }
    mass += px;
    for (std::size_t i = 0; i < p.sites(); ++i)
      if (!in_set[x ^ (std::uint64_t{1} << i)]) flow += px * p.flip(x, i);
  }
  Conductance c;
  c.flow = flow;
  c.complemented = mass > rest * (1.0 + 1e-12);
  c.mass = c.complemented ? rest : mass;
  c.phi = flow / c.mass;
  return c;
}

/// Membership of the closed Hamming ball of `radius` around `center`.
inline std::vector<char> hamming_ball(std::size_t n, std::uint64_t center, std::size_t radius) {
  std::vector<char> in(std::size_t{1} << n, 0);
  for (std::uint64_t x = 0; x < in.size(); ++x)
    in[x] = static_cast<std::size_t>(std::popcount(x ^ center)) <= radius ? 1 : 0;
  return in;
}

struct CheegerReport {
  double gap = 0.0;
  double phi_star = 0.0;  // best scanned cut; an upper bound on the true conductance
  std::string best_cut;
  std::size_t cuts_scanned = 0;
  bool upper_holds = false;       // gap <= 2 phi_star
  bool lower_consistent = false;  // gap >= phi_star^2 / 2

  nlohmann::json to_json() const {
    return {{"gap", gap},
            {"phi_star", phi_star},
            {"best_cut", best_cut},
            {"cuts_scanned", cuts_scanned},
            {"upper_bound", 2.0 * phi_star},
            {"lower_bound", 0.5 * phi_star * phi_star},
            {"upper_holds", upper_holds},
            {"lower_consistent", lower_consistent}};
  }
};

/// Scans every Hamming ball (all centers, radii 0..N-1) and every energy
/// level set, and compares the best cut with the exact gap.
inline CheegerReport cheeger_check(const TransitionMatrix& p) {
  const std::size_t n = p.sites();
  require_gate(n <= kCheegerGate, "cheeger_check: N exceeds 10");
  const std::uint64_t states = p.states();
  CheegerReport r;
  r.gap = spectral_gap(p, SpectralMethod::dense).gap;
  r.phi_star = std::numeric_limits<double>::infinity();
  auto consider = [&](double phi, const std::string& label) {
    ++r.cuts_scanned;
    if (phi < r.phi_star) {
      r.phi_star = phi;
      r.best_cut = label;
    }
  };
  for (std::uint64_t c = 0; c < states; ++c)
    for (std::size_t rad = 0; rad < n; ++rad)
      consider(conductance(p, hamming_ball(n, c, rad)).phi,
               "ball(center=" + SpinConfiguration::from_index(n, c).to_hex() + ",r=" + std::to_string(rad) + ")");

  std::vector<std::uint64_t> order(states);
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p.energy(a) > p.energy(b); });
  std::vector<char> in(states, 0);
  for (std::uint64_t k = 0; k + 1 < states; ++k) {
    in[order[k]] = 1;
    consider(conductance(p, in).phi, "level(top " + std::to_string(k + 1) + ")");
  }
  r.upper_holds = r.gap <= 2.0 * r.phi_star * (1.0 + 1e-12);
  r.lower_consistent = r.gap >= 0.5 * r.phi_star * r.phi_star;
  return r;
}

}  // namespace skglass
