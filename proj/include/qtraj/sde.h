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

#ifndef QTRAJ_SDE_H
#define QTRAJ_SDE_H

#include <cstdint>

#include "qtraj/core.h"
#include "qtraj/rng.h"

namespace qtraj {

/// Exact finite-step solution of the measurement term.
///
/// A dimensionless record u is drawn from rho00 N(+1, 1/kappa) +
/// rho11 N(-1, 1/kappa) and the state moves by z += kappa u. Two steps of
/// kappa compose to one step of 2 kappa in distribution, and rho00 is a
/// martingale. States on the cap are eigenstates and do not move.
QubitState step_diffusion_exact(QubitState state, double kappa, NoiseStream& noise);

/// Exact relaxation over delta = dt / T1: rho11 -> rho11 exp(-delta).
QubitState step_relaxation_exact(QubitState state, double delta);

/// Symmetric splitting: relaxation(delta/2), diffusion(kappa), relaxation(delta/2).
QubitState step_trotter(QubitState state, const StepBudget& budget, NoiseStream& noise);

/// Reference Euler-Maruyama step of the Ito equation in rho00, clamped to
/// [0,1]. Intended for g * dt <= 1e-3 cross-checks only.
QubitState step_euler_maruyama(QubitState state, double g, double dt, double T1, NoiseStream& noise);

enum class Integrator { kTrotter, kEulerMaruyama };

struct SimulationOptions {
  /// Store every k-th step. n_steps must be a multiple of it.
  std::uint64_t record_every = 1;
  Integrator integrator = Integrator::kTrotter;
  /// Euler-Maruyama substeps per model step.
  std::uint64_t em_substeps = 1;
};

/// Independent trajectories from x0, parallel over trajectories. Output is
/// bit-identical for a fixed SeedSpec whatever the thread count.
TrajectoryEnsemble simulate_ensemble(const ModelParams& params, std::uint64_t n_traj, SeedSpec seeds,
                                     const SimulationOptions& options = {});

/// Single-threaded reference for simulate_ensemble.
TrajectoryEnsemble simulate_ensemble_serial(const ModelParams& params, std::uint64_t n_traj, SeedSpec seeds,
                                            const SimulationOptions& options = {});

}  // namespace qtraj

#endif  // QTRAJ_SDE_H
