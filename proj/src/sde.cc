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

#include <algorithm>
#include <cmath>
#include <new>
#include <stdexcept>

namespace qtraj {

QubitState step_diffusion_exact(QubitState state, double kappa, NoiseStream& noise) {
  if (!(kappa >= 0.0)) throw std::domain_error("step_diffusion_exact: kappa < 0");
  if (kappa == 0.0 || state.at_cap()) return state;
  const double branch = noise.uniform() < state.rho00() ? 1.0 : -1.0;
  const double dz = branch * kappa + std::sqrt(kappa) * noise.normal();
  return QubitState::from_z(state.z() + dz);
}

QubitState step_relaxation_exact(QubitState state, double delta) {
  if (!(delta >= 0.0)) throw std::domain_error("step_relaxation_exact: delta < 0");
  if (delta == 0.0 || state.z() >= kZCap) return state;
  // Odds rho00/rho11 = e^{2z} map to e^{2z + delta} + (e^delta - 1).
  const double a = 2.0 * state.z() + delta;
  const double b = std::log(std::expm1(delta));
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return QubitState::from_z(0.5 * (hi + std::log1p(std::exp(lo - hi))));
}

QubitState step_trotter(QubitState state, const StepBudget& budget, NoiseStream& noise) {
  const double half = 0.5 * budget.delta;
  state = step_relaxation_exact(state, half);
  state = step_diffusion_exact(state, budget.kappa, noise);
  return step_relaxation_exact(state, half);
}

namespace {

inline double em_update(double rho, double g, double dt, double T1, double xi) {
  const double rho11 = 1.0 - rho;
  double next = rho + 2.0 * std::sqrt(g * dt) * rho * rho11 * xi;
  if (std::isfinite(T1)) next += rho11 * dt / T1;
  return std::clamp(next, 0.0, 1.0);
}

}  // namespace

QubitState step_euler_maruyama(QubitState state, double g, double dt, double T1, NoiseStream& noise) {
  const double rho = state.rho00();
  const double next = em_update(rho, g, dt, T1, noise.normal());
  return next == rho ? state : QubitState::from_rho(next);
}

namespace {

void check_inputs(const ModelParams& params, std::uint64_t n_traj, const SimulationOptions& options) {
  params.validate();
  if (n_traj == 0) throw std::invalid_argument("simulate_ensemble: n_traj must be >= 1");
  if (options.record_every == 0 || params.n_steps % options.record_every != 0) {
    throw std::invalid_argument("simulate_ensemble: n_steps must be a multiple of record_every");
  }
  if (options.integrator == Integrator::kEulerMaruyama && (options.em_substeps == 0 || options.em_substeps > (1u << 25))) {
    throw std::invalid_argument("simulate_ensemble: em_substeps must lie in [1, 2^25]");
  }
  if (params.n_steps > 0xFFFFFFFFull) {
    throw std::invalid_argument("simulate_ensemble: step count exceeds the 32-bit noise counter");
  }
}

TrajectoryEnsemble allocate(const ModelParams& params, std::uint64_t n_traj, const SimulationOptions& options) {
  try {
    return TrajectoryEnsemble(n_traj, params.n_steps / options.record_every,
                              params.dt * static_cast<double>(options.record_every));
  } catch (const std::bad_alloc&) {
    throw std::runtime_error("simulate_ensemble: cannot allocate ensemble storage");
  } catch (const std::length_error&) {
    throw std::runtime_error("simulate_ensemble: ensemble too large");
  }
}

void run_trajectory(const ModelParams& params, const StepBudget& budget, SeedSpec seeds,
                    const SimulationOptions& options, std::uint64_t traj, TrajectoryEnsemble& out) {
  QubitState s = QubitState::from_rho(params.x0);
  out.at(traj, 0) = s.rho00();
  const std::uint64_t m = options.em_substeps;
  const double sub_dt = params.dt / static_cast<double>(m);
  for (std::uint64_t step = 0; step < params.n_steps; ++step) {
    if (options.integrator == Integrator::kTrotter) {
      NoiseStream noise(seeds, traj, step, StreamDomain::kSimulation);
      s = step_trotter(s, budget, noise);
    } else {
      // Substeps stay in rho00 and share one stream per model step.
      NoiseStream noise(seeds, traj, step, StreamDomain::kEulerMaruyama);
      const double start = s.rho00();
      double rho = start;
      for (std::uint64_t k = 0; k < m; ++k) rho = em_update(rho, params.g, sub_dt, params.T1, noise.normal());
      if (rho != start) s = QubitState::from_rho(rho);
    }
    if ((step + 1) % options.record_every == 0) {
      out.at(traj, (step + 1) / options.record_every) = s.rho00();
    }
  }
}

}  // namespace

TrajectoryEnsemble simulate_ensemble(const ModelParams& params, std::uint64_t n_traj, SeedSpec seeds,
                                     const SimulationOptions& options) {
  check_inputs(params, n_traj, options);
  TrajectoryEnsemble out = allocate(params, n_traj, options);
  const StepBudget budget = params.budget();
  const auto n = static_cast<std::int64_t>(n_traj);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    run_trajectory(params, budget, seeds, options, static_cast<std::uint64_t>(i), out);
  }
  return out;
}

TrajectoryEnsemble simulate_ensemble_serial(const ModelParams& params, std::uint64_t n_traj, SeedSpec seeds,
                                            const SimulationOptions& options) {
  check_inputs(params, n_traj, options);
  TrajectoryEnsemble out = allocate(params, n_traj, options);
  const StepBudget budget = params.budget();
  for (std::uint64_t i = 0; i < n_traj; ++i) run_trajectory(params, budget, seeds, options, i, out);
  return out;
}

}  // namespace qtraj
