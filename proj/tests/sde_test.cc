// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "qtraj/sde.h"

#include <gtest/gtest.h>

#include <cmath>

#include "qtraj/fokker_planck.h"
#include "qtraj/stats.h"

namespace qtraj {
namespace {

NoiseStream stream(std::uint64_t i, std::uint64_t seed = 1) {
  return NoiseStream(SeedSpec{seed}, i, 0, StreamDomain::kTest);
}

TEST(DiffusionStep, ZeroKappaAndEigenstatesAreFixed) {
  auto n = stream(0);
  const auto s = QubitState::from_rho(0.305);
  EXPECT_EQ(step_diffusion_exact(s, 0.0, n), s);
  const auto one = QubitState::from_rho(1.0);
  const auto zero = QubitState::from_rho(0.0);
  for (int i = 0; i < 100; ++i) {
    auto ni = stream(i);
    EXPECT_EQ(step_diffusion_exact(one, 0.3, ni).rho00(), 1.0);
    EXPECT_EQ(step_diffusion_exact(zero, 0.3, ni).rho00(), 0.0);
  }
  EXPECT_THROW(step_diffusion_exact(s, -1e-3, n), std::domain_error);
}

// rho00 rounds to 1 at z = 20, so every draw takes the + branch:
// dz ~ N(kappa, kappa).
TEST(DiffusionStep, EigenstateIncrementMoments) {
  const double kappa = 0.01;
  const int n = 1000000;
  const auto s = QubitState::from_z(20.0);
  ASSERT_EQ(s.rho00(), 1.0);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    auto ni = stream(i);
    const double dz = step_diffusion_exact(s, kappa, ni).z() - s.z();
    m1 += dz;
    m2 += dz * dz;
  }
  m1 /= n;
  const double var = m2 / n - m1 * m1;
  EXPECT_NEAR(m1, kappa, 4.0 * std::sqrt(kappa / n));
  EXPECT_NEAR(var, kappa, 4.0 * kappa * std::sqrt(2.0 / n));
}

TEST(DiffusionStep, TwoStepsComposeToOne) {
  const double kappa = 0.05;
  const int n = 100000;
  const auto s = QubitState::from_rho(0.305);
  std::vector<double> two(n), one(n);
  for (int i = 0; i < n; ++i) {
    auto a = NoiseStream(SeedSpec{3}, i, 0, StreamDomain::kTest);
    auto b = NoiseStream(SeedSpec{3}, i, 1, StreamDomain::kTest);
    two[i] = step_diffusion_exact(step_diffusion_exact(s, kappa, a), kappa, b).z();
    auto c = NoiseStream(SeedSpec{4}, i, 0, StreamDomain::kTest);
    one[i] = step_diffusion_exact(s, 2.0 * kappa, c).z();
  }
  EXPECT_GT(ks_two_sample(two, one).p_value, 1e-3);
}

TEST(RelaxationStep, ClosedForm) {
  EXPECT_NEAR(step_relaxation_exact(QubitState::from_rho(0.0), std::log(2.0)).rho11(), 0.5, 1e-15);
  const double r11 = step_relaxation_exact(QubitState::from_rho(0.305), 0.5 / 45.0).rho11();
  EXPECT_NEAR(r11, 0.695 * std::exp(-1.0 / 90.0), 1e-14);
  EXPECT_NEAR(r11, 0.687320, 1e-6);
  const auto ground = QubitState::from_rho(1.0);
  EXPECT_EQ(step_relaxation_exact(ground, 0.3), ground);
  const auto s = QubitState::from_rho(0.4);
  EXPECT_EQ(step_relaxation_exact(s, 0.0), s);
  EXPECT_THROW(step_relaxation_exact(s, -0.1), std::domain_error);
}

TEST(RelaxationStep, DeepExcitedStatesStayAccurate) {
  for (double z : {-29.0, -20.0, -10.0, -3.0}) {
    const auto s = QubitState::from_z(z);
    const double delta = 1e-3;
    const long double r11 = 1.0L / (1.0L + std::exp(2.0L * z));
    const long double expected = r11 * std::exp(-static_cast<long double>(delta));
    EXPECT_NEAR(step_relaxation_exact(s, delta).rho11(), static_cast<double>(expected), 1e-15);
  }
}

TEST(RelaxationStep, HalvesCompose) {
  const auto s = QubitState::from_rho(0.12);
  const auto once = step_relaxation_exact(s, 0.2);
  const auto twice = step_relaxation_exact(step_relaxation_exact(s, 0.1), 0.1);
  EXPECT_NEAR(once.z(), twice.z(), 1e-14);
}

TEST(TrotterStep, ReducesToSubsteps) {
  const auto s = QubitState::from_rho(0.305);
  auto a = stream(5), b = stream(5);
  EXPECT_EQ(step_trotter(s, {0.02, 0.0}, a), step_diffusion_exact(s, 0.02, b));
  auto c = stream(6);
  EXPECT_NEAR(step_trotter(s, {0.0, 0.3}, c).z(), step_relaxation_exact(s, 0.3).z(), 1e-14);
}

TEST(EulerMaruyama, FrozenCases) {
  auto n = stream(1);
  const auto s = QubitState::from_rho(0.3);
  EXPECT_EQ(step_euler_maruyama(s, 0.0, 0.1, kInfinity, n), s);
  for (double r : {0.0, 1.0}) {
    const auto e = QubitState::from_rho(r);
    EXPECT_EQ(step_euler_maruyama(e, 5.0, 0.1, kInfinity, n).rho00(), r);
  }
}

TEST(EulerMaruyama, MatchesExactIntegrator) {
  ModelParams p;
  p.g = 1.0;
  p.dt = 0.25;
  p.x0 = 0.5;
  p.n_steps = 1;
  SimulationOptions em;
  em.integrator = Integrator::kEulerMaruyama;
  em.em_substeps = 2500;  // g dt = 1e-4
  const auto a = simulate_ensemble(p, 100000, SeedSpec{21}, em);
  const auto b = simulate_ensemble(p, 100000, SeedSpec{22});
  EXPECT_LT(total_variation(build_histogram(a, 1), build_histogram(b, 1)), 0.02);
}

TEST(Simulate, ConstantTrajectoryWithoutCoupling) {
  ModelParams p;
  p.g = 0.0;
  p.x0 = 0.42;
  p.n_steps = 10;
  const auto e = simulate_ensemble(p, 1, SeedSpec{1});
  for (auto v : e.trajectory(0)) EXPECT_EQ(v, 0.42);
}

TEST(Simulate, RecordEveryKeepsSubsetOfSlices) {
  ModelParams p;
  p.g = 0.02;
  p.dt = 0.5;
  p.x0 = 0.3;
  p.n_steps = 12;
  SimulationOptions o;
  o.record_every = 4;
  const auto full = simulate_ensemble(p, 50, SeedSpec{8});
  const auto thin = simulate_ensemble(p, 50, SeedSpec{8}, o);
  ASSERT_EQ(thin.n_slices(), 4u);
  EXPECT_DOUBLE_EQ(thin.dt, 2.0);
  for (std::uint64_t i = 0; i < 50; ++i) {
    for (std::uint64_t k = 0; k < 4; ++k) EXPECT_EQ(thin.at(i, k), full.at(i, 4 * k));
  }
  o.record_every = 5;
  EXPECT_THROW(simulate_ensemble(p, 50, SeedSpec{8}, o), std::invalid_argument);
}

TEST(Simulate, BornRuleMartingale) {
  for (double kappa : {0.005, 0.05, 0.4}) {
    for (double x0 : {0.1, 0.305, 0.8}) {
      ModelParams p;
      p.g = kappa;
      p.dt = 1.0;
      p.x0 = x0;
      p.n_steps = 10;
      SimulationOptions o;
      o.record_every = 5;
      const auto e = simulate_ensemble(p, 40000, SeedSpec{static_cast<std::uint64_t>(1000 * kappa + 10 * x0)}, o);
      for (std::uint64_t s = 1; s < e.n_slices(); ++s) {
        const double se = slice_stddev(e, s) / std::sqrt(static_cast<double>(e.n_traj));
        EXPECT_NEAR(slice_mean(e, s), x0, 4.0 * se) << kappa << " " << x0 << " " << s;
      }
    }
  }
}

TEST(Simulate, MeanFollowsRelaxation) {
  ModelParams p;
  p.g = 0.05;
  p.T1 = 10.0;
  p.dt = 0.5;
  p.x0 = 0.2;
  p.n_steps = 40;
  SimulationOptions o;
  o.record_every = 10;
  const auto e = simulate_ensemble(p, 50000, SeedSpec{77}, o);
  for (std::uint64_t s = 0; s < e.n_slices(); ++s) {
    const double expected = 1.0 - 0.8 * std::exp(-e.time(s) / p.T1);
    const double se = s == 0 ? 0.0 : slice_stddev(e, s) / std::sqrt(50000.0);
    EXPECT_NEAR(slice_mean(e, s), expected, 4.0 * se + 1e-12);
  }
}

TEST(Simulate, StrongMeasurementBornWeights) {
  ModelParams p;
  p.g = 0.6;
  p.dt = 1.0;
  p.x0 = 0.3;
  p.n_steps = 20;  // tau = 12
  SimulationOptions o;
  o.record_every = 20;
  const auto e = simulate_ensemble(p, 100000, SeedSpec{12}, o);
  std::size_t up = 0, down = 0;
  for (double v : e.slice(1)) {
    up += v > 0.99;
    down += v < 0.01;
  }
  EXPECT_NEAR(up / 1e5, 0.3, 0.005);
  EXPECT_NEAR(down / 1e5, 0.7, 0.005);
}

TEST(Simulate, InvalidInputs) {
  ModelParams p;
  EXPECT_THROW(simulate_ensemble(p, 0, SeedSpec{1}), std::invalid_argument);
  p.dt = -1.0;
  EXPECT_THROW(simulate_ensemble(p, 1, SeedSpec{1}), std::invalid_argument);
}

}  // namespace
}  // namespace qtraj
