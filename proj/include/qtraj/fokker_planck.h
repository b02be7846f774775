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

#ifndef QTRAJ_FOKKER_PLANCK_H
#define QTRAJ_FOKKER_PLANCK_H

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "qtraj/core.h"

namespace qtraj {

enum class Coordinate { kRho, kZ };

/// Cell-averaged probability on a uniform grid in either rho00 or z, plus
/// point masses beyond the lower and upper grid edges.
struct DensityGrid {
  Coordinate coordinate = Coordinate::kZ;
  double lower = -12.0;
  double upper = 12.0;
  std::vector<double> nodes;    // cell centres
  std::vector<double> weights;  // probability mass per cell
  double mass0 = 0.0;
  double mass1 = 0.0;
  double t = 0.0;

  static DensityGrid uniform(Coordinate coordinate, double lower, double upper, std::size_t n_cells);

  std::size_t n_cells() const { return weights.size(); }
  double cell_width() const { return (upper - lower) / static_cast<double>(weights.size()); }
  double edge(std::size_t j) const { return lower + static_cast<double>(j) * cell_width(); }
  double total_mass() const;
  /// First moment of rho00, treating the density as uniform within each cell.
  double mean_rho() const;
};

/// Raised when the solver loses positivity or mass.
class FpFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-form T1 = infinity solution in z: two Gaussians of common variance
/// tau centred at atanh(2 x0 - 1) +- tau, with weights x0 and 1 - x0.
struct GaussianMixture {
  double z_plus = 0.0;
  double z_minus = 0.0;
  double variance = 0.0;
  double weight_plus = 0.5;
  double weight_minus = 0.5;

  bool is_delta() const { return variance == 0.0; }
  double pdf(double z) const;
  /// Probability mass of (a, b].
  double mass(double a, double b) const;
};

GaussianMixture analytic_distribution_z(double x0, double tau);

/// The same solution as a density on rho00 in (0,1):
/// p(rho) = p_z(z(rho)) / (2 rho (1 - rho)).
class RhoDensity {
 public:
  explicit RhoDensity(GaussianMixture mixture) : mixture_(mixture) {}
  /// Returns 0 at rho in {0,1}, and everywhere when the solution is a delta.
  double operator()(double rho) const;
  const GaussianMixture& mixture() const { return mixture_; }

 private:
  GaussianMixture mixture_;
};

RhoDensity analytic_distribution_rho(double x0, double tau);

/// Analytic solution integrated exactly over histogram bins.
DistributionSnapshot analytic_snapshot(double x0, double tau, std::size_t n_bins = 100, double bin_width = 0.01);

struct FpOptions {
  std::size_t cells = 4096;
  double z_max = 12.0;
  /// Outer splitting step limits (relaxation exponent and measurement strength).
  double max_outer_delta = 0.01;
  double max_outer_kappa = 0.02;
  /// Crank-Nicolson substep as a multiple of dz^2; <= 2 keeps weights nonnegative.
  double cn_step_factor = 1.0;
};

/// Delta at x0 realised as the analytic solution at tau = (2 dz)^2, i.e. a
/// Gaussian of standard deviation two cells. solve_fp credits this tau back.
DensityGrid delta_initial(double x0, const FpOptions& options = {});

/// Conservative transfer of a rho-grid onto the solver's z-grid.
DensityGrid to_z_grid(const DensityGrid& grid, const FpOptions& options = {});

/// Evolves the density with measurement coupling g and relaxation time T1,
/// returning one grid per entry of t_grid (nondecreasing, >= initial.t).
///
/// Measurement (constant diffusion plus tanh z drift in z) is integrated by
/// Crank-Nicolson finite volumes; relaxation by the exact characteristic map
/// with conservative remapping. The two are combined by symmetric splitting.
/// Outflow past the grid edges accumulates in mass0 / mass1; relaxation
/// re-injects mass0.
std::vector<DensityGrid> solve_fp(const DensityGrid& initial, double g, double T1, std::span<const double> t_grid,
                                  const FpOptions& options = {});

/// Convenience overload starting from delta_initial(x0).
std::vector<DensityGrid> solve_fp(double x0, double g, double T1, std::span<const double> t_grid,
                                  const FpOptions& options = {});

/// Conservative rebinning onto rho histogram bins. Errors are left at zero.
DistributionSnapshot fp_snapshot_to_bins(const DensityGrid& grid, std::size_t n_bins = 100,
                                         double bin_width = 0.01);

}  // namespace qtraj

#endif  // QTRAJ_FOKKER_PLANCK_H
