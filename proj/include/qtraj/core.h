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

#ifndef QTRAJ_CORE_H
#define QTRAJ_CORE_H

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace qtraj {

/// Log-odds magnitude at which a state is treated as an eigenstate.
/// tanh(30) differs from 1 by ~1e-26, far below double resolution of rho00.
inline constexpr double kZCap = 30.0;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Maps a ground-state population rho00 in [0,1] to z = atanh(2 rho00 - 1).
/// Throws std::domain_error outside [0,1]. The result is clamped to +-kZCap.
double to_logodds(double rho00);

/// Inverse of to_logodds. Returns exactly 0 or 1 once |z| >= kZCap.
double to_rho(double z);

/// Diagonal qubit state in the measurement basis.
///
/// The log-odds coordinate z is the stored representation: a Bayesian
/// likelihood update is an addition in z, so states close to an eigenstate
/// keep full relative precision in their small population.
class QubitState {
 public:
  constexpr QubitState() = default;

  static QubitState from_rho(double rho00) { return QubitState(to_logodds(rho00)); }
  static QubitState from_z(double z);

  double z() const { return z_; }
  double rho00() const { return to_rho(z_); }
  double rho11() const { return to_rho(-z_); }

  /// True when the state sits on the cap (rho00 reported as exactly 0 or 1).
  bool at_cap() const { return z_ >= kZCap || z_ <= -kZCap; }

  friend bool operator==(QubitState a, QubitState b) = default;

 private:
  explicit constexpr QubitState(double z) : z_(z) {}
  double z_ = 0.0;
};

/// Per-step dimensionless increments of a discretised run.
struct StepBudget {
  double kappa = 0.0;  // g * dt
  double delta = 0.0;  // dt / T1

  void validate() const;
};

/// Theory-side parameters. Times share one unit (microseconds at the CLI).
struct ModelParams {
  double g = 0.0;          // measurement coupling, 1/time
  double T1 = kInfinity;   // relaxation time
  double dt = 1.0;         // step duration
  double x0 = 0.5;         // initial rho00
  std::uint64_t n_steps = 0;

  void validate() const;
  double tau(double t) const { return g * t; }
  double tau_total() const { return g * dt * static_cast<double>(n_steps); }
  StepBudget budget() const;
};

/// Experiment-side readout calibration.
struct CalibrationParams {
  double I0 = 1.0;
  double I1 = -1.0;
  double sigma = 1.0;
  double dt = 1.0;
  double T1 = kInfinity;
  double dts = 1.0;  // duration of the heralding strong measurement

  void validate() const;
  /// Per-step measurement strength (I0 - I1)^2 / (4 sigma^2).
  double kappa() const;
};

/// rho00 samples for n_traj trajectories at n_steps + 1 equally spaced times.
struct TrajectoryEnsemble {
  std::uint64_t n_traj = 0;
  std::uint64_t n_steps = 0;  // intervals between stored slices
  double dt = 0.0;            // time between stored slices
  std::vector<double> values; // row-major: values[traj * n_slices() + slice]

  TrajectoryEnsemble() = default;
  TrajectoryEnsemble(std::uint64_t n_traj, std::uint64_t n_steps, double dt);

  std::uint64_t n_slices() const { return n_steps + 1; }
  double time(std::uint64_t slice) const { return dt * static_cast<double>(slice); }
  double& at(std::uint64_t traj, std::uint64_t slice) { return values[traj * n_slices() + slice]; }
  double at(std::uint64_t traj, std::uint64_t slice) const { return values[traj * n_slices() + slice]; }
  std::span<const double> trajectory(std::uint64_t traj) const {
    return {values.data() + traj * n_slices(), n_slices()};
  }
  /// Copies out one time slice across all trajectories.
  std::vector<double> slice(std::uint64_t slice) const;
};

/// Binned rho00 distribution at a single time.
///
/// Bin k covers [k * bin_width, (k + 1) * bin_width). Values exactly 0 or 1
/// are held in the boundary masses instead of the bins.
struct DistributionSnapshot {
  std::size_t n_bins = 100;
  double bin_width = 0.01;
  std::vector<double> density;  // probability mass per bin
  std::vector<double> errors;   // total error per bin
  double mass0 = 0.0;
  double mass1 = 0.0;
  double mass0_error = 0.0;
  double mass1_error = 0.0;
  double t = 0.0;

  DistributionSnapshot() = default;
  DistributionSnapshot(std::size_t n_bins, double bin_width);

  double bin_center(std::size_t k) const { return (static_cast<double>(k) + 0.5) * bin_width; }
  double total_mass() const;
  void validate() const;
};

/// Histogram of one ensemble slice. Parallel over trajectories; the result is
/// independent of the thread count.
DistributionSnapshot build_histogram(const TrajectoryEnsemble& ensemble, std::uint64_t slice,
                                     std::size_t n_bins = 100, double bin_width = 0.01);

/// Single-threaded reference for build_histogram.
DistributionSnapshot build_histogram_serial(const TrajectoryEnsemble& ensemble, std::uint64_t slice,
                                            std::size_t n_bins = 100, double bin_width = 0.01);

/// Histogram of a flat list of rho00 values (same conventions as build_histogram).
DistributionSnapshot histogram_of(std::span<const double> rho_values, std::size_t n_bins = 100,
                                  double bin_width = 0.01);

/// Half the L1 distance over bins plus both boundary masses.
double total_variation(const DistributionSnapshot& a, const DistributionSnapshot& b);

/// Sum of |a - b| over bins only.
double l1_bins(const DistributionSnapshot& a, const DistributionSnapshot& b);

/// Mean of one ensemble slice, summed in fixed blocks so the result does not
/// depend on the thread count.
double slice_mean(const TrajectoryEnsemble& ensemble, std::uint64_t slice);

/// Sample standard deviation of one ensemble slice.
double slice_stddev(const TrajectoryEnsemble& ensemble, std::uint64_t slice);

}  // namespace qtraj

#endif  // QTRAJ_CORE_H
