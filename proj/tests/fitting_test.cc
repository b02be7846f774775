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


#include "qtraj/fitting.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qtraj/sde.h"

namespace qtraj {
namespace {

// Exact T1 = infinity distribution: a two-branch Gaussian mixture in log-odds.
std::vector<double> mixture_samples(double x0, double tau, std::size_t n, std::uint64_t seed) {
  const double z0 = std::atanh(2.0 * x0 - 1.0);
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) {
    NoiseStream noise(SeedSpec{seed}, i, 0, StreamDomain::kTest);
    const double branch = noise.uniform() < x0 ? 1.0 : -1.0;
    const double z = z0 + branch * tau + std::sqrt(tau) * noise.normal();
    rho[i] = 0.5 * (1.0 + std::tanh(z));
  }
  return rho;
}

DistributionSnapshot observed_at(double x0, double tau, std::size_t n, std::uint64_t seed) {
  return histogram_of(mixture_samples(x0, tau, n, seed));
}

TEST(Chi2, SelfFitIsZero) {
  const auto h = observed_at(0.4, 0.3, 10000, 1);
  EXPECT_EQ(chi2(h, h), 0.0);
}

TEST(Chi2, UnitResiduals) {
  DistributionSnapshot a(100, 0.01), b(100, 0.01);
  for (std::size_t k = 0; k < 100; ++k) {
    a.density[k] = 2.0;
    a.errors[k] = 1.0;
    b.density[k] = 1.0;
  }
  EXPECT_DOUBLE_EQ(chi2(a, b), 100.0);
}

TEST(Chi2, IndependentSamplesFollowTheChi2Distribution) {
  const auto a = observed_at(0.305, 1.2, 1000000, 2);
  const auto b = observed_at(0.305, 1.2, 1000000, 3);
  const double c = chi2(a, b);
  EXPECT_GE(c, 60.0);
  EXPECT_LE(c, 160.0);
}

TEST(Chi2, BoundaryMassesCount) {
  DistributionSnapshot a(10, 0.1), b(10, 0.1);
  std::fill(a.errors.begin(), a.errors.end(), 1.0);
  a.mass1 = 0.5;
  a.mass1_error = 0.1;
  EXPECT_NEAR(chi2(a, b), 25.0, 1e-12);
}

TEST(Chi2, RejectsMismatchedBinning) {
  const DistributionSnapshot a(100, 0.01), b(50, 0.02);
  EXPECT_THROW(chi2(a, b), std::invalid_argument);
  DistributionSnapshot c(100, 0.01), d(100, 0.01);
  c.density[3] = 1.0;
  EXPECT_THROW(chi2(c, d), std::invalid_argument);
}

TEST(Chi2, InvariantUnderBinRelabelling) {
  auto a = observed_at(0.6, 0.4, 20000, 4);
  auto b = analytic_snapshot(0.6, 0.45);
  const double before = chi2(a, b);
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  NoiseStream noise(SeedSpec{5}, 0, 0, StreamDomain::kTest);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[static_cast<std::size_t>(noise.uniform() * static_cast<double>(i + 1))]);
  }
  auto pa = a, pb = b;
  for (std::size_t k = 0; k < 100; ++k) {
    pa.density[k] = a.density[perm[k]];
    pa.errors[k] = a.errors[perm[k]];
    pb.density[k] = b.density[perm[k]];
    pb.errors[k] = b.errors[perm[k]];
  }
  EXPECT_NEAR(chi2(pa, pb), before, 1e-10 * before);
}

TEST(TauScan, GridCoversBothEnds) {
  const auto g = TauScan{}.grid();
  ASSERT_EQ(g.size(), 251u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_NEAR(g.back(), 2.5, 1e-12);
  EXPECT_THROW((TauScan{0.0, 0.01, 0.01}.grid()), std::invalid_argument);
}

TEST(FitTau, ExactModelSnapshotGivesZeroChi2) {
  const auto model = analytic_model(0.5);
  auto obs = model(0, 0.8);
  for (auto& e : obs.errors) e = 1e-3;
  obs.mass0_error = obs.mass1_error = 1e-3;
  const std::vector<DistributionSnapshot> slices{obs};
  const auto fit = fit_tau(slices, model);
  ASSERT_EQ(fit.size(), 1u);
  EXPECT_NEAR(fit[0].tau_best, 0.8, 1e-9);
  EXPECT_NEAR(fit[0].chi2_min, 0.0, 1e-12);
  EXPECT_FALSE(fit[0].minimum_at_edge);
  EXPECT_EQ(fit[0].scan.size(), 251u);
  double smallest = fit[0].scan[0].second;
  for (const auto& [tau, c] : fit[0].scan) smallest = std::min(smallest, c);
  EXPECT_LE(fit[0].chi2_min, smallest);
}

TEST(FitTau, RoundTripOnSimulatedEnsemble) {
  ModelParams p;
  p.g = 0.1;
  p.dt = 1.0;
  p.x0 = 0.305;
  p.n_steps = 5;
  const auto e = simulate_ensemble(p, 1000000, SeedSpec{21}, SimulationOptions{.record_every = 5});
  const std::vector<DistributionSnapshot> slices{build_histogram(e, 1)};
  const auto fit = fit_tau(slices, analytic_model(0.305));
  EXPECT_NEAR(fit[0].tau_best, 0.5, fit[0].tau_error);
  EXPECT_LT(fit[0].tau_error_dchi2_1, fit[0].tau_error);
  EXPECT_LT(fit[0].chi2_min, 200.0);
  EXPECT_EQ(fit[0].n_bins, 100u);
  EXPECT_FALSE(fit[0].error_open_ended);
}

TEST(FitTau, RoundTripIsUnbiased) {
  const auto model = analytic_model(0.305);
  std::vector<DistributionSnapshot> sets;
  for (std::uint64_t s = 0; s < 20; ++s) sets.push_back(observed_at(0.305, 0.5, 100000, 100 + s));
  double mean_tau = 0.0, mean_err = 0.0;
  for (const auto& f : fit_tau(sets, model)) {
    mean_tau += f.tau_best / 20.0;
    mean_err += f.tau_error / 20.0;
  }
  EXPECT_LT(std::abs(mean_tau - 0.5), mean_err);
}

TEST(FitTau, EdgeMinimumIsFlagged) {
  const std::vector<DistributionSnapshot> slices{observed_at(0.5, 2.0, 100000, 7)};
  const auto fit = fit_tau(slices, analytic_model(0.5), TauScan{0.0, 1.0, 0.01});
  EXPECT_TRUE(fit[0].minimum_at_edge);
  EXPECT_NEAR(fit[0].tau_best, 1.0, 1e-12);
}

TEST(FitTau, LaterSlicesFitLargerTau) {
  ModelParams p;
  p.g = 0.02;
  p.dt = 1.0;
  p.x0 = 0.5;
  p.n_steps = 40;
  const auto e = simulate_ensemble(p, 200000, SeedSpec{8}, SimulationOptions{.record_every = 10});
  std::vector<DistributionSnapshot> slices;
  for (std::uint64_t s = 1; s <= 4; ++s) slices.push_back(build_histogram(e, s));
  const auto fit = fit_tau(slices, analytic_model(0.5));
  for (std::size_t j = 0; j < fit.size(); ++j) {
    EXPECT_NEAR(fit[j].tau_best, 0.2 * static_cast<double>(j + 1), fit[j].tau_error);
    if (j > 0) {
      EXPECT_GE(fit[j].tau_best + std::hypot(fit[j].tau_error, fit[j - 1].tau_error), fit[j - 1].tau_best);
    }
  }
}

TEST(FitTau, ErrorShrinksWithEnsembleSize) {
  const auto model = analytic_model(0.7);
  const std::vector<DistributionSnapshot> small{observed_at(0.7, 0.6, 100000, 9)};
  const std::vector<DistributionSnapshot> large{observed_at(0.7, 0.6, 1000000, 10)};
  EXPECT_LT(fit_tau(large, model)[0].tau_error, fit_tau(small, model)[0].tau_error);
}

TEST(FitTau, FokkerPlanckModelAgreesWithAnalytic) {
  const std::vector<double> times{20.0};
  const std::vector<DistributionSnapshot> slices{observed_at(0.305, 0.6, 200000, 11)};
  const auto a = fit_tau(slices, analytic_model(0.305), TauScan{0.4, 0.8, 0.02});
  const auto f = fit_tau(slices, fp_model(0.305, kInfinity, times, FpOptions{.cells = 1024}), TauScan{0.4, 0.8, 0.02});
  EXPECT_NEAR(f[0].tau_best, a[0].tau_best, 0.1 * a[0].tau_error_dchi2_1);
}

RecordSet synthetic_records(double x0, std::uint64_t n_traj, bool mirrored) {
  CalibrationParams cal;
  cal.I0 = 1.0;
  cal.I1 = -1.0;
  cal.sigma = 4.0;
  ModelParams p;
  p.g = cal.kappa();
  p.x0 = x0;
  p.n_steps = 30;
  auto rs = generate_records(p, cal, n_traj, SeedSpec{31}).records;
  if (mirrored) {
    const auto n = rs.currents.size();
    for (std::size_t i = 0; i < n; ++i) rs.currents.push_back(-rs.currents[i]);
    rs.n_traj *= 2;
  }
  return rs;
}

TEST(SystematicErrors, ZeroRangesGiveZero) {
  const auto rs = synthetic_records(0.3, 2000, false);
  const std::vector<std::uint64_t> slices{10, 30};
  const auto b = systematic_errors(rs, rs.cal, 0.3, FluctuationRanges{}, slices);
  ASSERT_EQ(b.size(), 2u);
  for (const auto& budget : b) {
    for (std::size_t k = 0; k < 100; ++k) {
      EXPECT_EQ(budget.systematic[k], 0.0);
      EXPECT_EQ(budget.total[k], budget.statistical[k]);
    }
  }
}

TEST(SystematicErrors, TotalDominatesComponents) {
  const auto rs = synthetic_records(0.3, 2000, false);
  const std::vector<std::uint64_t> slices{30};
  const auto b = systematic_errors(rs, rs.cal, 0.3, FluctuationRanges{0.02, 0.0, 0.05, 0.05}, slices)[0];
  for (std::size_t k = 0; k < 100; ++k) {
    EXPECT_GE(b.total[k], b.statistical[k]);
    EXPECT_GE(b.total[k], b.systematic[k]);
    double sq = 0.0;
    for (const auto& c : b.contributions) sq += c[k] * c[k];
    EXPECT_NEAR(b.systematic[k], std::sqrt(sq), 1e-15);
  }
  auto snap = build_histogram(reconstruct_ensemble(rs), 30);
  b.apply(snap);
  EXPECT_EQ(snap.errors, b.total);
}

TEST(SystematicErrors, CentreShiftsMirror) {
  const auto rs = synthetic_records(0.5, 20000, true);
  const std::vector<std::uint64_t> slices{30};
  const double n = static_cast<double>(rs.n_traj);
  const auto a = systematic_errors(rs, rs.cal, 0.5, FluctuationRanges{0, 0, 0.05, 0}, slices)[0];
  const auto b = systematic_errors(rs, rs.cal, 0.5, FluctuationRanges{0, 0, 0, 0.05}, slices)[0];
  double sum = 0.0;
  for (std::size_t k = 0; k < 100; ++k) {
    EXPECT_NEAR(a.contributions[2][k], b.contributions[3][99 - k], 1.5 / n);
    sum += a.contributions[2][k];
  }
  EXPECT_GT(sum, 0.0);
}

// Net bin shifts are differences of crossing counts, so a single bin can
// beat the bound by its counting noise; the summed shift cannot.
TEST(SystematicErrors, DoublingRangeAtMostDoublesContribution) {
  const auto rs = synthetic_records(0.3, 200000, false);
  const std::vector<std::uint64_t> slices{30};
  const double n = static_cast<double>(rs.n_traj);
  for (int p = 0; p < 4; ++p) {
    if (p == 1) continue;  // T1 is infinite here
    FluctuationRanges r1, r2;
    double* f1[] = {&r1.x0, &r1.T1, &r1.I0, &r1.I1};
    double* f2[] = {&r2.x0, &r2.T1, &r2.I0, &r2.I1};
    *f1[p] = 0.005;
    *f2[p] = 0.01;
    const auto b1 = systematic_errors(rs, rs.cal, 0.3, r1, slices)[0];
    const auto& c1 = b1.contributions[p];
    const auto c2 = systematic_errors(rs, rs.cal, 0.3, r2, slices)[0].contributions[p];
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
      EXPECT_LE(c2[k], 2.0 * c1[k] + b1.statistical[k] + 1.0 / n) << "param " << p << " bin " << k;
      s1 += c1[k];
      s2 += c2[k];
    }
    EXPECT_LE(s2, 2.0 * s1) << "param " << p;
    EXPECT_GT(s2, s1) << "param " << p;
  }
}

TEST(Efficiency, IdealRecordsFitUnitEfficiency) {
  CalibrationParams cal;
  cal.I0 = 128.443;
  cal.I1 = 127.856;
  cal.sigma = 5.56;
  cal.dt = 0.5;
  ModelParams p;
  p.g = cal.kappa() / cal.dt;
  p.dt = cal.dt;
  p.x0 = 0.5;
  p.n_steps = 160;
  const auto data = generate_records(p, cal, 100000, SeedSpec{44});
  const auto e = reconstruct_ensemble(data.records);
  const std::vector<DistributionSnapshot> slices{build_histogram(e, 160)};
  const auto fit = fit_tau(slices, analytic_model(0.5), TauScan{0.2, 0.7, 0.005});
  const double tau_expected = 160 * cal.kappa();
  EXPECT_NEAR(fit[0].tau_best, tau_expected, fit[0].tau_error);
  const auto eff = estimate_efficiency(fit[0].tau_best, cal, 160);
  EXPECT_NEAR(eff.eta, 1.0, fit[0].tau_error / tau_expected * 1.2);
}

}  // namespace
}  // namespace qtraj
