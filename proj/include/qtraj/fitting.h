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

#ifndef QTRAJ_FITTING_H
#define QTRAJ_FITTING_H

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "qtraj/bayesian.h"
#include "qtraj/core.h"
#include "qtraj/fokker_planck.h"

namespace qtraj {

/// Sum of squared residuals over bins, with observed and model errors added
/// in quadrature. Boundary masses enter as two extra terms when either side
/// carries mass there.
double chi2(const DistributionSnapshot& observed, const DistributionSnapshot& model);

struct TauScan {
  double tau_min = 0.0;
  double tau_max = 2.5;
  double tau_step = 0.01;

  std::vector<double> grid() const;
};

/// Best-fit tau for one time slice.
///
/// tau_error uses the Delta chi2 = 100 half-width; tau_error_dchi2_1 is the
/// conventional one-parameter interval. Both are half the distance between
/// the crossings on either side of the minimum.
struct FitResult {
  double t = 0.0;
  double tau_best = 0.0;
  double chi2_min = 0.0;
  double tau_error = 0.0;
  double tau_error_dchi2_1 = 0.0;
  std::size_t n_bins = 0;
  std::vector<std::pair<double, double>> scan;  // (tau, chi2)
  bool minimum_at_edge = false;
  bool error_open_ended = false;
};

/// Model histogram for time slice `slice` at evolution parameter tau.
using ModelFn = std::function<DistributionSnapshot(std::size_t slice, double tau)>;

/// Independent per-slice scans with parabolic refinement of the minimum.
/// Grid points are evaluated in parallel.
std::vector<FitResult> fit_tau(std::span<const DistributionSnapshot> observed, const ModelFn& model,
                               const TauScan& scan = {});

/// T1 = infinity closed-form model (no slice dependence).
ModelFn analytic_model(double x0, std::size_t n_bins = 100, double bin_width = 0.01);

/// Fokker-Planck model: slice j sits at slice_times[j]; tau sets g = tau / t.
ModelFn fp_model(double x0, double T1, std::vector<double> slice_times, FpOptions options = {},
                 std::size_t n_bins = 100, double bin_width = 0.01);

/// Monte Carlo model: n_traj trajectories of step dt up to slice_times[j].
/// Its statistical errors enter chi2 through the model snapshot.
ModelFn ensemble_model(double x0, double T1, double dt, std::vector<double> slice_times, std::uint64_t n_traj,
                       SeedSpec seeds, std::size_t n_bins = 100, double bin_width = 0.01);

/// Parameter fluctuation ranges for the systematic error budget.
struct FluctuationRanges {
  double x0 = 0.0;
  double T1 = 0.0;
  double I0 = 0.0;
  double I1 = 0.0;
};

struct ErrorBudget {
  std::vector<double> statistical;
  std::vector<double> systematic;
  std::vector<double> total;
  double mass0_statistical = 0.0;
  double mass1_statistical = 0.0;
  double mass0_systematic = 0.0;
  double mass1_systematic = 0.0;
  /// Per-parameter contributions in x0, T1, I0, I1 order.
  std::array<std::vector<double>, 4> contributions;

  /// Writes total errors into a snapshot of the same binning.
  void apply(DistributionSnapshot& snapshot) const;
};

/// Rebuilds the reconstructed histogram with each parameter moved by -range
/// and +range in turn; a parameter contributes the RMS of its two bin shifts,
/// and contributions add in quadrature.
std::vector<ErrorBudget> systematic_errors(const RecordSet& records, const CalibrationParams& cal, double x0,
                                           const FluctuationRanges& ranges, std::span<const std::uint64_t> slices,
                                           std::size_t n_bins = 100, double bin_width = 0.01);

}  // namespace qtraj

#endif  // QTRAJ_FITTING_H
