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

#ifndef QTRAJ_BAYESIAN_H
#define QTRAJ_BAYESIAN_H

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtraj/core.h"
#include "qtraj/rng.h"

namespace qtraj {

/// Integrated current per step for one run.
struct MeasurementRecord {
  std::vector<double> currents;
  double dt = 1.0;
};

/// Records of an ensemble of runs sharing one calibration.
struct RecordSet {
  CalibrationParams cal;
  double x0 = 0.5;
  std::uint64_t master_seed = 0;
  std::uint64_t n_traj = 0;
  std::uint64_t n_steps = 0;
  std::vector<double> currents;  // row-major by trajectory

  std::span<const double> record(std::uint64_t traj) const {
    return {currents.data() + traj * n_steps, n_steps};
  }
  MeasurementRecord measurement(std::uint64_t traj) const;
  void validate() const;
};

/// Observed current variance split into the informative part and amplifier
/// noise: sigma_obs^2 = sigma_ideal^2 + sigma_noise^2, eta = sigma_ideal^2 / sigma_obs^2.
struct EfficiencyModel {
  double sigma_obs = 1.0;
  double sigma_ideal = 1.0;
  double sigma_noise = 0.0;
  double eta = 1.0;

  static EfficiencyModel from_observed(double sigma_obs, double eta);
  static EfficiencyModel from_components(double sigma_ideal, double sigma_noise);
};

/// Per-step observed calibration (time in the record time base).
struct CalibrationSeries {
  std::vector<double> t;
  std::vector<double> I0;
  std::vector<double> I1;
  std::vector<double> sigma;
};

/// Per-step eigenstate currents used in place of the static calibration.
struct EffectiveCalibration {
  std::vector<double> I0;
  std::vector<double> I1;
  std::vector<std::string> warnings;
};

class FitFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bayesian update by one integrated current Im:
/// z += (I0 - I1)(2 Im - I0 - I1) / (4 sigma^2).
QubitState update_measurement(QubitState state, double Im, const CalibrationParams& cal);
QubitState update_measurement(QubitState state, double Im, double I0, double I1, double sigma);

/// rho11 -> rho11 exp(-dt / T1); shares step_relaxation_exact.
QubitState update_relaxation(QubitState state, double dt, double T1);

/// Rebuilds rho00 after each step (plus the initial value) using
/// relaxation(dt/2), measurement, relaxation(dt/2).
std::vector<double> reconstruct_trajectory(const MeasurementRecord& record, const CalibrationParams& cal, double x0);
std::vector<double> reconstruct_trajectory(const MeasurementRecord& record, const CalibrationParams& cal, double x0,
                                           const EffectiveCalibration& effective);

/// Reconstructs every record of the set, parallel over trajectories.
TrajectoryEnsemble reconstruct_ensemble(const RecordSet& records, const CalibrationParams& cal, double x0);
TrajectoryEnsemble reconstruct_ensemble(const RecordSet& records);
/// Single-threaded reference for reconstruct_ensemble.
TrajectoryEnsemble reconstruct_ensemble_serial(const RecordSet& records, const CalibrationParams& cal, double x0);

struct GeneratedData {
  RecordSet records;
  TrajectoryEnsemble latent;
};

/// Synthetic records from a latent trajectory that follows the same
/// splitting as the reconstruction. Im is drawn from
/// rho00 N(I0, sigma^2) + rho11 N(I1, sigma^2) with the weights taken after
/// the leading relaxation half-step. With eta < 1 the latent state is driven
/// by the informative part of the current and the record carries extra
/// amplifier noise; the caller passes params.g * dt = kappa_obs / eta.
GeneratedData generate_records(const ModelParams& params, const CalibrationParams& cal, std::uint64_t n_traj,
                               SeedSpec seeds, double eta = 1.0);

struct GaussianFit {
  double center = 0.0;
  double sigma = 0.0;
  double center_error = 0.0;
  double sigma_error = 0.0;
  std::size_t n = 0;
};

/// Maximum-likelihood centre and unbiased width of current samples.
GaussianFit fit_gaussian_current(std::span<const double> samples);

/// y = asymptote + amplitude * exp(-rate t)
struct ExponentialFit {
  double asymptote = 0.0;
  double amplitude = 0.0;
  double rate = 0.0;
  double asymptote_error = 0.0;
  double amplitude_error = 0.0;
  double rate_error = 0.0;
  double rss = 0.0;

  double operator()(double t) const;
};

/// Three-parameter least-squares exponential fit. Throws FitFailure when
/// the data carry no resolvable decay.
ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> y);

struct T1Estimate {
  double T1 = 0.0;
  double error = 0.0;
};

/// Fits <I>(t) = I0 + (I1 - I0) exp(-t / T1) to the ensemble-averaged
/// current of an excited-state-initialised run, with I0, I1 from cal.
T1Estimate estimate_T1(std::span<const double> times, std::span<const double> mean_current,
                       const CalibrationParams& cal);

/// Replaces the early-time transient: observed values for t <= 2 us; for
/// t > 2 us the fitted I0 asymptote and the fitted I1 at 2.5 us.
EffectiveCalibration preprocess_calibration(const CalibrationSeries& series);

struct EfficiencyEstimate {
  double eta = 1.0;
  bool above_one = false;
};

/// eta = n_steps * kappa_obs / tau_fitted. Values above 1 are reported, not clamped.
EfficiencyEstimate estimate_efficiency(double tau_fitted, const CalibrationParams& cal, std::uint64_t n_steps);

/// Heralding strong measurement: outcome 0 (rho00 -> 1) with probability
/// rho00, and the initial-state uncertainty 1 - exp(-dts / T1).
struct HeraldResult {
  int outcome = 0;
  QubitState prepared;
  double uncertainty = 0.0;
};

HeraldResult herald(QubitState state, const CalibrationParams& cal, NoiseStream& noise);
double preparation_uncertainty(const CalibrationParams& cal);

}  // namespace qtraj

#endif  // QTRAJ_BAYESIAN_H
