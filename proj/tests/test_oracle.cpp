#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "oracle.hpp"

namespace {

Eigen::MatrixXd random_symmetric(int n, unsigned seed) {
  std::srand(seed);
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(n, n);
  return (m + m.transpose()) / std::sqrt(static_cast<double>(n));
}

}  // namespace

TEST(Oracle, NaiveEnergyHandExample) {
  Eigen::MatrixXd g(2, 2);
  g << 0, 1, 1, 0;
  EXPECT_NEAR(oracle::naive_energy_raw(g, {1, 1}), std::sqrt(2.0), 1e-15);
  const Eigen::MatrixXd a = (g + g.transpose()) / std::sqrt(2.0);
  EXPECT_NEAR(oracle::naive_energy(a, {1, 1}), std::sqrt(2.0), 1e-15);
}

TEST(Oracle, ZeroAndEvenness) {
  EXPECT_EQ(oracle::naive_energy(Eigen::MatrixXd::Zero(4, 4), {1, -1, 1, 1}), 0.0);
  const auto a = random_symmetric(9, 1);
  for (std::uint64_t x = 0; x < 512; x += 37) {
    auto s = oracle::spins_of(x, 9), t = s;
    for (auto& v : t) v = -v;
    EXPECT_NEAR(oracle::naive_energy(a, s), oracle::naive_energy(a, t), 1e-12);
  }
}

TEST(Oracle, HypercubeClosedForms) {
  const auto f = oracle::hypercube_closed_forms(12);
  EXPECT_DOUBLE_EQ(f.gap, 1.0 / 12);
  double total = 0;
  for (double m : f.multiplicities) total += m;
  EXPECT_EQ(total, 4096.0);
  EXPECT_EQ(f.multiplicities[3], 220.0);
}

TEST(Oracle, DenseAnalysisAtInfiniteTemperatureMatchesClosedForm) {
  const int n = 6;
  const auto chain = oracle::dense_chain_analysis(random_symmetric(n, 2), 0.0);
  const auto forms = oracle::hypercube_closed_forms(n);
  std::map<long, int> counts;
  for (Eigen::Index k = 0; k < chain.spectrum.size(); ++k) counts[std::lround(chain.spectrum(k) * 1e9)]++;
  for (int k = 0; k <= n; ++k)
    EXPECT_EQ(counts[std::lround(forms.eigenvalues[static_cast<std::size_t>(k)] * 1e9)],
              static_cast<int>(forms.multiplicities[static_cast<std::size_t>(k)]));
}

TEST(Oracle, StationaryVectorIsGibbs) {
  const auto a = random_symmetric(7, 3);
  const double beta = 1.7;
  const auto chain = oracle::dense_chain_analysis(a, beta);
  const double log_z = oracle::naive_log_partition(a, beta);
  for (std::uint64_t x = 0; x < 128; ++x)
    EXPECT_NEAR(chain.stationary(static_cast<Eigen::Index>(x)),
                std::exp(beta * oracle::naive_energy(a, oracle::spins_of(x, 7)) - log_z), 1e-12);
  EXPECT_LE((chain.stationary.transpose() * chain.transition - chain.stationary.transpose()).cwiseAbs().sum(), 1e-12);
}

TEST(Oracle, ExpectedExitAtInfiniteTemperature) {
  // one step to leave distance 0 needs on average 2 steps (flip probability 1/2)
  EXPECT_NEAR(oracle::hypercube_expected_exit(10, 1), 2.0, 1e-12);
  EXPECT_NEAR(oracle::hypercube_expected_exit(10, 3), 7.5555555555555, 1e-9);
}

TEST(Oracle, Gates) {
  EXPECT_THROW(oracle::dense_chain_analysis(Eigen::MatrixXd::Zero(11, 11), 1.0), std::out_of_range);
  EXPECT_THROW(oracle::exhaustive_maximin(Eigen::MatrixXd::Zero(21, 21)), std::out_of_range);
}

TEST(Oracle, RestrictedNormOfSmallCases) {
  EXPECT_EQ(oracle::brute_restricted_norm(Eigen::MatrixXd::Zero(8, 8), 3), 0.0);
  // all-ones off the diagonal: every k-subset has top eigenvalue k - 1
  Eigen::MatrixXd j = Eigen::MatrixXd::Ones(8, 8);
  j.diagonal().setZero();
  EXPECT_NEAR(oracle::brute_restricted_norm(j, 3), 2.0, 1e-12);
  EXPECT_NEAR(oracle::brute_restricted_norm(j, 8), 7.0, 1e-12);
}

TEST(Oracle, SphereAtInfiniteTemperatureCountsStates) {
  const auto a = random_symmetric(9, 4);
  for (int r = 0; r <= 9; ++r) {
    const auto s = oracle::naive_sphere(a, 0x5a, r, 0.0);
    EXPECT_EQ(s.count, oracle::choose(9, r));
    EXPECT_NEAR(s.log_ratio, std::log(oracle::choose(9, r)), 1e-12);
  }
  EXPECT_EQ(oracle::hamming(0b1011, 0b0110), 3);
}

TEST(Oracle, BallConductanceAtInfiniteTemperature) {
  const int n = 10, r = 2;
  const auto a = random_symmetric(n, 5);
  double inside = 0.0;
  for (int k = 0; k <= r; ++k) inside += oracle::choose(n, k);
  // each boundary state at distance r has N - r outward moves taken w.p. 1/(2N)
  const double flow = oracle::choose(n, r) * (n - r) / (2.0 * n) / std::ldexp(1.0, n);
  const double mass = inside / std::ldexp(1.0, n);
  EXPECT_NEAR(oracle::naive_ball_conductance(a, 0.0, 17, r), flow / std::min(mass, 1.0 - mass), 1e-12);
}
