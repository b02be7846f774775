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

#include "qtraj/core.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <omp.h>

namespace qtraj {

double to_logodds(double rho00) {
  if (!(rho00 >= 0.0 && rho00 <= 1.0)) {
    throw std::domain_error("to_logodds: rho00 outside [0,1]: " + std::to_string(rho00));
  }
  if (rho00 == 0.0) return -kZCap;
  if (rho00 == 1.0) return kZCap;
  double z = 0.5 * (std::log(rho00) - std::log1p(-rho00));
  return std::clamp(z, -kZCap, kZCap);
}

double to_rho(double z) {
  if (z >= kZCap) return 1.0;
  if (z <= -kZCap) return 0.0;
  return 1.0 / (1.0 + std::exp(-2.0 * z));
}

QubitState QubitState::from_z(double z) {
  if (std::isnan(z)) {
    throw std::domain_error("QubitState: z is NaN");
  }
  return QubitState(std::clamp(z, -kZCap, kZCap));
}

void StepBudget::validate() const {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw std::domain_error("StepBudget: kappa must be finite and >= 0");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::domain_error("StepBudget: delta must be finite and >= 0");
  }
}

void ModelParams::validate() const {
  if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("ModelParams: g must be finite and >= 0");
  if (!(T1 > 0.0)) throw std::invalid_argument("ModelParams: T1 must be > 0 (or infinite)");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("ModelParams: dt must be finite and > 0");
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw std::invalid_argument("ModelParams: x0 must lie in [0,1]");
}

StepBudget ModelParams::budget() const {
  return StepBudget{g * dt, std::isinf(T1) ? 0.0 : dt / T1};
}

void CalibrationParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("CalibrationParams: sigma must be > 0");
  if (!std::isfinite(I0) || !std::isfinite(I1)) throw std::invalid_argument("CalibrationParams: I0, I1 must be finite");
  if (I0 == I1) throw std::invalid_argument("CalibrationParams: I0 must differ from I1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("CalibrationParams: dt must be > 0");
  if (!(T1 > 0.0)) throw std::invalid_argument("CalibrationParams: T1 must be > 0 (or infinite)");
  if (!(dts >= 0.0)) throw std::invalid_argument("CalibrationParams: dts must be >= 0");
}

double CalibrationParams::kappa() const {
  double d = I0 - I1;
  return d * d / (4.0 * sigma * sigma);
}

TrajectoryEnsemble::TrajectoryEnsemble(std::uint64_t n_traj, std::uint64_t n_steps, double dt)
    : n_traj(n_traj), n_steps(n_steps), dt(dt), values(n_traj * (n_steps + 1)) {}

std::vector<double> TrajectoryEnsemble::slice(std::uint64_t s) const {
  if (s >= n_slices()) throw std::out_of_range("TrajectoryEnsemble::slice: index out of range");
  std::vector<double> out(n_traj);
  for (std::uint64_t i = 0; i < n_traj; ++i) out[i] = at(i, s);
  return out;
}

DistributionSnapshot::DistributionSnapshot(std::size_t n, double w)
    : n_bins(n), bin_width(w), density(n, 0.0), errors(n, 0.0) {}

double DistributionSnapshot::total_mass() const {
  double s = mass0 + mass1;
  for (double d : density) s += d;
  return s;
}

void DistributionSnapshot::validate() const {
  if (n_bins == 0 || density.size() != n_bins || errors.size() != n_bins) {
    throw std::invalid_argument("DistributionSnapshot: inconsistent bin count");
  }
  if (!(bin_width > 0.0) || static_cast<double>(n_bins) * bin_width < 1.0 - 1e-9) {
    throw std::invalid_argument("DistributionSnapshot: bins do not cover [0,1]");
  }
}

namespace {

void check_binning(std::size_t n_bins, double bin_width) {
  if (n_bins == 0 || !(bin_width > 0.0) || static_cast<double>(n_bins) * bin_width < 1.0 - 1e-9) {
    throw std::invalid_argument("histogram: n_bins * bin_width must cover [0,1]");
  }
}

// Slot layout: [0, n_bins) bins, n_bins -> mass0, n_bins + 1 -> mass1.
inline std::size_t slot_of(double rho, std::size_t n_bins, double bin_width) {
  if (rho <= 0.0) return n_bins;
  if (rho >= 1.0) return n_bins + 1;
  auto k = static_cast<std::size_t>(rho / bin_width);
  return std::min(k, n_bins - 1);
}

DistributionSnapshot snapshot_from_counts(const std::vector<std::uint64_t>& counts, std::uint64_t n,
                                          std::size_t n_bins, double bin_width) {
  DistributionSnapshot out(n_bins, bin_width);
  const double inv_n = 1.0 / static_cast<double>(n);
  auto err = [&](std::uint64_t c) { return std::sqrt(static_cast<double>(std::max<std::uint64_t>(c, 1))) * inv_n; };
  for (std::size_t k = 0; k < n_bins; ++k) {
    out.density[k] = static_cast<double>(counts[k]) * inv_n;
    out.errors[k] = err(counts[k]);
  }
  out.mass0 = static_cast<double>(counts[n_bins]) * inv_n;
  out.mass1 = static_cast<double>(counts[n_bins + 1]) * inv_n;
  out.mass0_error = err(counts[n_bins]);
  out.mass1_error = err(counts[n_bins + 1]);
  return out;
}

}  // namespace

DistributionSnapshot build_histogram_serial(const TrajectoryEnsemble& ensemble, std::uint64_t slice,
                                            std::size_t n_bins, double bin_width) {
  check_binning(n_bins, bin_width);
  if (ensemble.n_traj == 0) throw std::invalid_argument("build_histogram: empty ensemble");
  if (slice >= ensemble.n_slices()) throw std::out_of_range("build_histogram: slice out of range");
  std::vector<std::uint64_t> counts(n_bins + 2, 0);
  for (std::uint64_t i = 0; i < ensemble.n_traj; ++i) {
    ++counts[slot_of(ensemble.at(i, slice), n_bins, bin_width)];
  }
  auto out = snapshot_from_counts(counts, ensemble.n_traj, n_bins, bin_width);
  out.t = ensemble.time(slice);
  return out;
}

DistributionSnapshot build_histogram(const TrajectoryEnsemble& ensemble, std::uint64_t slice,
                                     std::size_t n_bins, double bin_width) {
  check_binning(n_bins, bin_width);
  if (ensemble.n_traj == 0) throw std::invalid_argument("build_histogram: empty ensemble");
  if (slice >= ensemble.n_slices()) throw std::out_of_range("build_histogram: slice out of range");
  const std::size_t n_slots = n_bins + 2;
  std::vector<std::uint64_t> counts(n_slots, 0);
  const auto n = static_cast<std::int64_t>(ensemble.n_traj);
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(n_slots, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      ++local[slot_of(ensemble.at(static_cast<std::uint64_t>(i), slice), n_bins, bin_width)];
    }
#pragma omp critical(qtraj_histogram_merge)
    for (std::size_t k = 0; k < n_slots; ++k) counts[k] += local[k];
  }
  auto out = snapshot_from_counts(counts, ensemble.n_traj, n_bins, bin_width);
  out.t = ensemble.time(slice);
  return out;
}

DistributionSnapshot histogram_of(std::span<const double> rho_values, std::size_t n_bins, double bin_width) {
  check_binning(n_bins, bin_width);
  if (rho_values.empty()) throw std::invalid_argument("histogram_of: no values");
  std::vector<std::uint64_t> counts(n_bins + 2, 0);
  for (double r : rho_values) ++counts[slot_of(r, n_bins, bin_width)];
  return snapshot_from_counts(counts, rho_values.size(), n_bins, bin_width);
}

double l1_bins(const DistributionSnapshot& a, const DistributionSnapshot& b) {
  if (a.n_bins != b.n_bins) throw std::invalid_argument("l1_bins: binning mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.n_bins; ++k) s += std::abs(a.density[k] - b.density[k]);
  return s;
}

double total_variation(const DistributionSnapshot& a, const DistributionSnapshot& b) {
  double s = l1_bins(a, b);
  s += std::abs(a.mass0 - b.mass0) + std::abs(a.mass1 - b.mass1);
  return 0.5 * s;
}

namespace {

constexpr std::int64_t kReduceBlock = 4096;

// Blocked reduction with a fixed block layout: each block is summed serially
// and the block sums are combined in index order.
template <typename F>
double blocked_sum(std::int64_t n, F&& term) {
  const std::int64_t n_blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(static_cast<std::size_t>(n_blocks), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    double s = 0.0;
    const std::int64_t end = std::min(n, (b + 1) * kReduceBlock);
    for (std::int64_t i = b * kReduceBlock; i < end; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

double slice_mean(const TrajectoryEnsemble& ensemble, std::uint64_t slice) {
  if (ensemble.n_traj == 0) throw std::invalid_argument("slice_mean: empty ensemble");
  const auto n = static_cast<std::int64_t>(ensemble.n_traj);
  double s = blocked_sum(n, [&](std::int64_t i) { return ensemble.at(static_cast<std::uint64_t>(i), slice); });
  return s / static_cast<double>(n);
}

double slice_stddev(const TrajectoryEnsemble& ensemble, std::uint64_t slice) {
  if (ensemble.n_traj < 2) throw std::invalid_argument("slice_stddev: need at least two trajectories");
  const double mean = slice_mean(ensemble, slice);
  const auto n = static_cast<std::int64_t>(ensemble.n_traj);
  double ss = blocked_sum(n, [&](std::int64_t i) {
    double d = ensemble.at(static_cast<std::uint64_t>(i), slice) - mean;
    return d * d;
  });
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace qtraj
