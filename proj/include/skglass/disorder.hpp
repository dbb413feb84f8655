#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skglass/errors.hpp"
#include "skglass/rng.hpp"

namespace skglass {

enum class Law : std::uint8_t { gaussian = 0, rademacher = 1, custom = 2 };

inline const char* to_string(Law law) {
  switch (law) {
    case Law::gaussian: return "gaussian";
    case Law::rademacher: return "rademacher";
    case Law::custom: return "custom";
  }
  return "unknown";
}

inline Law parse_law(const std::string& name) {
  if (name == "gaussian") return Law::gaussian;
  if (name == "rademacher") return Law::rademacher;
  if (name == "custom") return Law::custom;
  throw ConfigError("unknown disorder law '" + name + "'");
}

/// Finite discrete law given as (value, probability) pairs. Must be centered
/// with unit variance.
struct DiscreteLaw {
  std::vector<double> values;
  std::vector<double> probabilities;

  void validate() const {
    require(!values.empty() && values.size() == probabilities.size(),
            "custom law: values and probabilities must be non-empty and of equal length");
    double total = 0.0, mean = 0.0, second = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      require(std::isfinite(values[k]) && probabilities[k] >= 0.0,
              "custom law: values must be finite and probabilities non-negative");
      total += probabilities[k];
      mean += probabilities[k] * values[k];
      second += probabilities[k] * values[k] * values[k];
    }
    constexpr double tol = 1e-12;
    require(std::abs(total - 1.0) <= tol, "custom law: probabilities must sum to 1");
    require(std::abs(mean) <= tol, "custom law: mean must be 0");
    require(std::abs(second - mean * mean - 1.0) <= tol, "custom law: variance must be 1");
  }

  bool operator==(const DiscreteLaw&) const = default;
};

struct DisorderSpec {
  Law law = Law::gaussian;
  std::size_t n = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t instance_index = 0;
  DiscreteLaw table;  // only for Law::custom

  void validate() const {
    require(n >= 2, "disorder: N must be at least 2");
    if (law == Law::custom) table.validate();
  }

  bool operator==(const DisorderSpec&) const = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raw IID disorder G (asymmetric, full grid including the diagonal).
struct CouplingMatrix {
  DisorderSpec spec;
  RowMatrix g;

  std::size_t size() const { return static_cast<std::size_t>(g.rows()); }
};

/// A = (G + G^T) / sqrt(N). Symmetric by construction.
class SymmetricCoupling {
 public:
  SymmetricCoupling() = default;

  /// Wraps an arbitrary matrix; it must be exactly symmetric with finite entries.
  static SymmetricCoupling from_matrix(Eigen::MatrixXd a) {
    require(a.rows() == a.cols() && a.rows() >= 1, "coupling must be a non-empty square matrix");
    require(a.allFinite(), "coupling entries must be finite");
    require((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0, "coupling must be exactly symmetric");
    SymmetricCoupling s;
    s.a_ = std::move(a);
    return s;
  }

  std::size_t size() const { return static_cast<std::size_t>(a_.rows()); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  double operator()(std::size_t i, std::size_t j) const {
    return a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  const std::optional<double>& cached_operator_norm() const { return op_norm_; }
  void cache_operator_norm(double value) { op_norm_ = value; }

  /// True when every off-diagonal coupling is zero (no spin interacts).
  bool is_degenerate() const {
    for (Eigen::Index i = 0; i < a_.rows(); ++i)
      for (Eigen::Index j = 0; j < a_.cols(); ++j)
        if (i != j && a_(i, j) != 0.0) return false;
    return true;
  }

 private:
  Eigen::MatrixXd a_;
  std::optional<double> op_norm_;
};

namespace detail {

inline double draw_entry(const DisorderSpec& spec, Rng& rng,
                         const std::vector<double>& cumulative) {
  switch (spec.law) {
    case Law::gaussian: return rng.normal();
    case Law::rademacher: return static_cast<double>(rng.sign());
    case Law::custom: {
      const double u = rng.uniform();
      std::size_t k = 0;
      while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
      return spec.table.values[k];
    }
  }
  return 0.0;
}

}  // namespace detail

/// Draws G row-major from the stream derive_seed(master_seed, instance_index).
inline CouplingMatrix sample_disorder(const DisorderSpec& spec) {
  spec.validate();
  std::vector<double> cumulative;
  if (spec.law == Law::custom) {
    double acc = 0.0;
    for (double p : spec.table.probabilities) cumulative.push_back(acc += p);
  }
  Rng rng(spec.master_seed, spec.instance_index);
  const auto n = static_cast<Eigen::Index>(spec.n);
  CouplingMatrix out{spec, RowMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.g(i, j) = detail::draw_entry(spec, rng, cumulative);
  return out;
}

inline SymmetricCoupling symmetrize(const CouplingMatrix& g) {
  const Eigen::Index n = g.g.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = (g.g(i, j) + g.g(j, i)) * scale;
      a(i, j) = v;
      a(j, i) = v;
    }
  return SymmetricCoupling::from_matrix(std::move(a));
}

inline SymmetricCoupling sample_symmetric(const DisorderSpec& spec) {
  return symmetrize(sample_disorder(spec));
}

/// Largest absolute eigenvalue of a symmetric matrix.
///
/// Power iteration on A^2 from the all-ones vector; the estimate ||A v|| for a
/// unit v is a lower bound on the norm and stops once its relative change per
/// iteration stays below rel_tol. A second run from a random start (drawn from
/// `seed`) guards against an initial vector orthogonal to the top eigenspace;
/// the larger of the two estimates is returned.
inline double operator_norm(const Eigen::MatrixXd& a, double rel_tol = 1e-6,
                            std::uint64_t seed = 0, int max_iterations = 20000) {
  require(a.rows() == a.cols(), "operator_norm: matrix must be square");
  require(rel_tol > 0.0 && rel_tol <= 1e-2, "operator_norm: rel_tol must lie in (0, 1e-2]");
  require(a.allFinite(), "operator_norm: entries must be finite");
  require((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0, "operator_norm: matrix must be symmetric");
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  double best = 0.0;
  auto run = [&](Eigen::VectorXd v) -> std::optional<double> {
    v.normalize();
    double previous = 0.0;
    int calm = 0;
    for (int it = 0; it < max_iterations; ++it) {
      Eigen::VectorXd w = a * v;
      const double estimate = w.norm();
      best = std::max(best, estimate);
      if (estimate == 0.0) return 0.0;
      if (std::abs(estimate - previous) <= rel_tol * estimate) {
        if (++calm >= 3) return estimate;
      } else {
        calm = 0;
      }
      previous = estimate;
      v = a * w;
      const double norm = v.norm();
      if (norm == 0.0) return estimate;
      v /= norm;
    }
    return std::nullopt;
  };

  auto first = run(Eigen::VectorXd::Ones(n));
  Rng rng(seed, 0x6f70);
  Eigen::VectorXd start(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = rng.normal();
  auto second = run(start);
  if (!first || !second) {
    throw ConvergenceError("operator_norm: power iteration did not converge", best, rel_tol);
  }
  return std::max(*first, *second);
}

inline double operator_norm(SymmetricCoupling& a, double rel_tol = 1e-6, std::uint64_t seed = 0) {
  if (!a.cached_operator_norm()) a.cache_operator_norm(operator_norm(a.matrix(), rel_tol, seed));
  return *a.cached_operator_norm();
}

// Binary matrix file:
//   "SKG1" | u32 version=1 | u32 N | u8 law | u64 master_seed | u64 instance_index
//   | N*N f64 row-major | u64 FNV-1a over the f64 payload bytes.
// All integers and floats little-endian.

inline constexpr std::uint32_t kMatrixFileVersion = 1;

inline std::uint64_t fnv1a(const unsigned char* data, std::size_t size,
                           std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= data[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(value >> (8 * b)));
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(p[b]) << (8 * b);
  return value;
}

}  // namespace detail

inline void save_matrix(const std::filesystem::path& path, const CouplingMatrix& g) {
  const auto n = g.size();
  std::vector<unsigned char> header;
  for (char c : std::string("SKG1")) header.push_back(static_cast<unsigned char>(c));
  detail::put_le<std::uint32_t>(header, kMatrixFileVersion);
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(n));
  header.push_back(static_cast<unsigned char>(g.spec.law));
  detail::put_le<std::uint64_t>(header, g.spec.master_seed);
  detail::put_le<std::uint64_t>(header, g.spec.instance_index);

  std::vector<unsigned char> payload;
  payload.reserve(n * n * 8);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      detail::put_le<std::uint64_t>(
          payload, std::bit_cast<std::uint64_t>(g.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
  std::vector<unsigned char> trailer;
  detail::put_le<std::uint64_t>(trailer, fnv1a(payload.data(), payload.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  out.write(reinterpret_cast<const char*>(trailer.data()), static_cast<std::streamsize>(trailer.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

/// Loads a matrix file. When expected_n is given, a file of another size is a
/// DimensionError. Custom-law files load without their probability table.
inline CouplingMatrix load_matrix(const std::filesystem::path& path,
                                  std::optional<std::size_t> expected_n = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header_size = 4 + 4 + 4 + 1 + 8 + 8;
  if (bytes.size() < header_size) throw FormatError("matrix file truncated (header)");
  if (std::memcmp(bytes.data(), "SKG1", 4) != 0) throw FormatError("bad magic, not an SKG1 matrix file");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kMatrixFileVersion) throw FormatError("unsupported matrix file version " + std::to_string(version));
  const auto n = static_cast<std::size_t>(detail::get_le<std::uint32_t>(bytes.data() + 8));
  const auto law_tag = bytes[12];
  if (law_tag > static_cast<unsigned char>(Law::custom)) throw FormatError("unknown law tag");
  if (expected_n && *expected_n != n)
    throw DimensionError("matrix file has N=" + std::to_string(n) + " but N=" + std::to_string(*expected_n) +
                         " was requested");
  const std::size_t payload_size = n * n * 8;
  if (bytes.size() != header_size + payload_size + 8) throw FormatError("matrix file truncated or oversized");
  const unsigned char* payload = bytes.data() + header_size;
  const auto stored = detail::get_le<std::uint64_t>(payload + payload_size);
  if (stored != fnv1a(payload, payload_size)) throw FormatError("matrix file checksum mismatch");

  CouplingMatrix g;
  g.spec.law = static_cast<Law>(law_tag);
  g.spec.n = n;
  g.spec.master_seed = detail::get_le<std::uint64_t>(bytes.data() + 13);
  g.spec.instance_index = detail::get_le<std::uint64_t>(bytes.data() + 21);
  const auto en = static_cast<Eigen::Index>(n);
  g.g.resize(en, en);
  for (std::size_t k = 0; k < n * n; ++k) {
    const double v = std::bit_cast<double>(detail::get_le<std::uint64_t>(payload + 8 * k));
    if (!std::isfinite(v)) throw FormatError("matrix file contains non-finite entries");
    g.g(static_cast<Eigen::Index>(k / n), static_cast<Eigen::Index>(k % n)) = v;
  }
  return g;
}

}  // namespace skglass
