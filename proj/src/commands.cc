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


#include "qtraj/commands.h"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "qtraj/bayesian.h"
#include "qtraj/fitting.h"
#include "qtraj/fokker_planck.h"
#include "qtraj/io.h"
#include "qtraj/sde.h"

namespace qtraj {

namespace {

void require_output(const RunConfig& c) {
  if (c.output.empty()) throw UsageError(c.command + ": --output is required");
}

void require_input(const std::string& path, const char* key, const RunConfig& c) {
  if (path.empty()) throw UsageError(c.command + ": --" + key + " is required");
}

void write_manifest(const RunConfig& c) { write_file_atomic(c.output + ".manifest", encode_manifest(c)); }

std::string slice_path(const RunConfig& c, std::size_t k, const char* ext) {
  return c.output + ".slice" + std::to_string(k) + ext;
}

ModelParams model_params(const RunConfig& c) {
  ModelParams p;
  p.g = c.g;
  p.T1 = c.T1_us;
  p.dt = c.dt_us;
  p.x0 = c.x0;
  p.n_steps = c.n_steps;
  p.validate();
  return p;
}

CalibrationParams calibration(const RunConfig& c) {
  CalibrationParams cal;
  cal.I0 = c.I0;
  cal.I1 = c.I1;
  cal.sigma = c.sigma;
  cal.dt = c.dt_us;
  cal.T1 = c.T1_us;
  cal.dts = c.dts_us;
  cal.validate();
  return cal;
}

void check_binning(const RunConfig& c) {
  if (c.n_bins == 0 || !(c.bin_width > 0.0) || static_cast<double>(c.n_bins) * c.bin_width < 1.0 - 1e-9) {
    throw UsageError("n_bins * bin_width must cover [0,1]");
  }
}

// Slice indices of an ensemble for the requested times (default: last slice).
std::vector<std::uint64_t> slice_indices(const TrajectoryEnsemble& e, const std::vector<double>& times) {
  if (times.empty()) return {e.n_steps};
  std::vector<std::uint64_t> out;
  for (double t : times) {
    const double r = t / e.dt;
    const double idx = std::round(r);
    if (std::abs(r - idx) > 1e-6 * std::max(1.0, r) || idx > static_cast<double>(e.n_steps)) {
      throw UsageError("slice time " + format_double(t) + " us is not a stored slice (spacing " +
                       format_double(e.dt) + " us, last " + format_double(e.time(e.n_steps)) + " us)");
    }
    out.push_back(static_cast<std::uint64_t>(idx));
  }
  return out;
}

// Calibration, x0 and dt from a record header unless given explicitly;
// the resolved values are written back so the manifest reproduces the run.
CalibrationParams resolve_from_records(RunConfig& c, const RecordSet& r) {
  if (!c.given("I0")) c.I0 = r.cal.I0;
  if (!c.given("I1")) c.I1 = r.cal.I1;
  if (!c.given("sigma")) c.sigma = r.cal.sigma;
  if (!c.given("T1_us")) c.T1_us = r.cal.T1;
  if (!c.given("x0")) c.x0 = r.x0;
  if (c.given("dt_us") && c.dt_us != r.cal.dt) {
    throw UsageError("dt_us = " + format_double(c.dt_us) + " contradicts the record file (" +
                     format_double(r.cal.dt) + ")");
  }
  c.dt_us = r.cal.dt;
  c.n_traj = r.n_traj;
  c.n_steps = r.n_steps;
  if (!(c.x0 >= 0.0 && c.x0 <= 1.0)) throw UsageError("x0 must lie in [0,1]");
  return calibration(c);
}

double mean_of(const DistributionSnapshot& s) {
  double m = s.mass1;
  for (std::size_t k = 0; k < s.n_bins; ++k) m += s.bin_center(k) * s.density[k];
  return m;
}

ModelFn make_model(const RunConfig& c, const std::vector<double>& times) {
  if (c.model == "analytic") return analytic_model(c.x0, c.n_bins, c.bin_width);
  if (c.model == "fp") {
    FpOptions opt;
    opt.cells = c.fp_cells;
    opt.z_max = c.fp_z_max;
    return fp_model(c.x0, c.T1_us, times, opt, c.n_bins, c.bin_width);
  }
  if (c.model == "ensemble") {
    return ensemble_model(c.x0, c.T1_us, c.dt_us, times, c.model_n_traj, SeedSpec{c.model_seed}, c.n_bins,
                          c.bin_width);
  }
  throw UsageError("model must be analytic, fp or ensemble");
}

TauScan scan_of(const RunConfig& c) {
  TauScan s{c.tau_min, c.tau_max, c.tau_step};
  try {
    s.grid();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return s;
}

// Observed histograms of an ensemble file plus, when --records is given,
// the systematic error budget folded into the bin errors.
struct Observed {
  std::vector<DistributionSnapshot> snapshots;
  std::vector<double> times;
};

Observed observe(RunConfig& c) {
  require_input(c.input, "input", c);
  check_binning(c);
  const EnsembleFile file = read_ensemble(c.input);
  const auto& ens = file.ensemble;
  const auto idx = slice_indices(ens, c.slice_times());
  Observed o;
  for (auto i : idx) {
    o.snapshots.push_back(build_histogram(ens, i, c.n_bins, c.bin_width));
    o.times.push_back(ens.time(i));
  }
  if (!c.records.empty()) {
    const RecordSet records = read_records(c.records);
    const CalibrationParams cal = resolve_from_records(c, records);
    if (records.n_traj != ens.n_traj || records.n_steps != ens.n_steps || records.cal.dt != ens.dt) {
      throw UsageError("record file and ensemble file describe different runs");
    }
    FluctuationRanges ranges{c.x0_range, c.T1_range_us, c.I0_range, c.I1_range};
    const auto budgets = systematic_errors(records, cal, c.x0, ranges, idx, c.n_bins, c.bin_width);
    for (std::size_t j = 0; j < idx.size(); ++j) budgets[j].apply(o.snapshots[j]);
  } else {
    if (!c.given("dt_us")) c.dt_us = ens.dt;
    if (!(c.x0 >= 0.0 && c.x0 <= 1.0)) throw UsageError("x0 must lie in [0,1]");
  }
  return o;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace

void cmd_generate(RunConfig c, std::ostream& log) {
  require_output(c);
  if (!c.seed) throw UsageError("generate: --seed is required");
  if (!(c.eta > 0.0 && c.eta <= 1.0)) throw UsageError("eta must lie in (0,1]");
  if (c.n_traj == 0) throw UsageError("n_traj must be >= 1");
  const CalibrationParams cal = calibration(c);
  c.g = cal.kappa() / c.eta / c.dt_us;
  if (c.latent.empty()) c.latent = c.output + ".latent";
  const ModelParams params = model_params(c);
  const GeneratedData data = generate_records(params, cal, c.n_traj, SeedSpec{*c.seed}, c.eta);
  write_records(c.output, data.records, c.text);
  write_ensemble(c.latent, EnsembleFile{data.latent, *c.seed});
  write_manifest(c);
  log << "records " << c.output << ": n_traj=" << c.n_traj << " n_steps=" << c.n_steps
      << " kappa=" << format_double(cal.kappa()) << " tau_total=" << format_double(params.tau_total()) << "\n";
  log << "latent " << c.latent << "\n";
}

void cmd_simulate(RunConfig c, std::ostream& log) {
  require_output(c);
  if (!c.seed) throw UsageError("simulate: --seed is required");
  if (c.n_traj == 0) throw UsageError("n_traj must be >= 1");
  check_binning(c);
  const ModelParams params = model_params(c);
  SimulationOptions opt;
  opt.record_every = c.record_every;
  opt.em_substeps = c.em_substeps;
  if (c.integrator == "trotter") {
    opt.integrator = Integrator::kTrotter;
  } else if (c.integrator == "euler") {
    opt.integrator = Integrator::kEulerMaruyama;
  } else {
    throw UsageError("integrator must be trotter or euler");
  }
  if (c.record_every == 0 || c.n_steps % c.record_every != 0) {
    throw UsageError("n_steps must be a multiple of record_every");
  }
  const TrajectoryEnsemble ens = simulate_ensemble(params, c.n_traj, SeedSpec{*c.seed}, opt);
  const auto idx = slice_indices(ens, c.slice_times());
  write_ensemble(c.output, EnsembleFile{ens, *c.seed});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    DistributionSnapshot s = build_histogram(ens, idx[k], c.n_bins, c.bin_width);
    write_snapshot(slice_path(c, k, ".hist"), s);
    log << "slice " << k << " t_us=" << format_double(s.t) << " mean=" << format_double(slice_mean(ens, idx[k]))
        << " mass0=" << format_double(s.mass0) << " mass1=" << format_double(s.mass1) << "\n";
  }
  write_manifest(c);
  log << "ensemble " << c.output << ": n_traj=" << ens.n_traj << " slices=" << ens.n_slices() << "\n";
}

void cmd_solve_fp(RunConfig c, std::ostream& log) {
  require_output(c);
  check_binning(c);
  if (!(c.x0 >= 0.0 && c.x0 <= 1.0)) throw UsageError("x0 must lie in [0,1]");
  if (!(c.g >= 0.0) || !(c.T1_us > 0.0)) throw UsageError("need g >= 0 and T1_us > 0");
  std::vector<double> times = c.slice_times();
  if (times.empty()) times.push_back(c.dt_us * static_cast<double>(c.n_steps));
  FpOptions opt;
  opt.cells = c.fp_cells;
  opt.z_max = c.fp_z_max;
  const auto grids = solve_fp(c.x0, c.g, c.T1_us, times, opt);
  for (std::size_t k = 0; k < grids.size(); ++k) {
    DistributionSnapshot s = fp_snapshot_to_bins(grids[k], c.n_bins, c.bin_width);
    write_snapshot(slice_path(c, k, ".hist"), s);
    log << "slice " << k << " t_us=" << format_double(s.t) << " mean=" << format_double(mean_of(s))
        << " mass0=" << format_double(s.mass0) << " mass1=" << format_double(s.mass1) << "\n";
  }
  write_manifest(c);
}

void cmd_reconstruct(RunConfig c, std::ostream& log) {
  require_output(c);
  require_input(c.input, "input", c);
  const RecordSet records = read_records(c.input);
  const CalibrationParams cal = resolve_from_records(c, records);
  const TrajectoryEnsemble ens = reconstruct_ensemble(records, cal, c.x0);
  write_ensemble(c.output, EnsembleFile{ens, records.master_seed});
  if (!c.slices_us.empty()) {
    check_binning(c);
    const auto idx = slice_indices(ens, c.slice_times());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      write_snapshot(slice_path(c, k, ".hist"), build_histogram(ens, idx[k], c.n_bins, c.bin_width));
    }
  }
  write_manifest(c);
  log << "ensemble " << c.output << ": n_traj=" << ens.n_traj << " slices=" << ens.n_slices()
      << " kappa=" << format_double(cal.kappa()) << "\n";
}

void cmd_fit(RunConfig c, std::ostream& log) {
  require_output(c);
  const Observed obs = observe(c);
  const auto results = fit_tau(obs.snapshots, make_model(c, obs.times), scan_of(c));
  write_file_atomic(c.output, encode_fit_report(results));
  write_manifest(c);
  for (const auto& r : results) {
    log << "t_us=" << format_double(r.t) << " tau=" << format_double(r.tau_best)
        << " err100=" << format_double(r.tau_error) << " err1=" << format_double(r.tau_error_dchi2_1)
        << " chi2=" << format_double(r.chi2_min) << (r.minimum_at_edge ? " [minimum at scan edge]" : "")
        << (r.error_open_ended ? " [error open-ended]" : "") << "\n";
  }
}

void cmd_calibrate(RunConfig c, std::ostream& log) {
  require_output(c);
  require_input(c.ground, "ground", c);
  require_input(c.excited, "excited", c);
  const RecordSet ground = read_records(c.ground);
  const RecordSet excited = read_records(c.excited);
  if (ground.cal.dt != excited.cal.dt) throw UsageError("calibration files use different dt");
  if (excited.n_steps < 3) throw UsageError("excited calibration needs at least 3 steps");
  const double dt = excited.cal.dt;
  c.dt_us = dt;

  const GaussianFit g0 = fit_gaussian_current(ground.currents);
  std::vector<double> first(excited.n_traj);
  for (std::uint64_t i = 0; i < excited.n_traj; ++i) first[i] = excited.record(i)[0];
  const GaussianFit g1 = fit_gaussian_current(first);

  // Mean excited-state current at the step midpoints.
  std::vector<double> times(excited.n_steps), mean(excited.n_steps, 0.0);
  for (std::uint64_t k = 0; k < excited.n_steps; ++k) {
    times[k] = (static_cast<double>(k) + 0.5) * dt;
    for (std::uint64_t i = 0; i < excited.n_traj; ++i) mean[k] += excited.record(i)[k];
    mean[k] /= static_cast<double>(excited.n_traj);
  }
  CalibrationParams cal;
  cal.I0 = g0.center;
  cal.I1 = g1.center;
  cal.sigma = g0.sigma;
  cal.dt = dt;
  T1Estimate t1 = estimate_T1(times, mean, cal);
  // The first-step centre has already relaxed for half a step.
  cal.I1 = cal.I0 + (g1.center - cal.I0) * std::exp(0.5 * dt / t1.T1);
  t1 = estimate_T1(times, mean, cal);
  // The decay amplitude is fixed by the fitted centres, so their errors feed T1.
  double t1_var = t1.error * t1.error;
  for (int which = 0; which < 2; ++which) {
    CalibrationParams shifted = cal;
    (which == 0 ? shifted.I0 : shifted.I1) += which == 0 ? g0.center_error : g1.center_error;
    const double d = estimate_T1(times, mean, shifted).T1 - t1.T1;
    t1_var += d * d;
  }
  t1.error = std::sqrt(t1_var);
  cal.T1 = t1.T1;

  nlohmann::ordered_json out;
  out["dt_us"] = dt;
  out["I0"] = cal.I0;
  out["I0_err"] = g0.center_error;
  out["I1"] = cal.I1;
  out["I1_err"] = g1.center_error;
  out["sigma"] = g0.sigma;
  out["sigma_err"] = g0.sigma_error;
  out["kappa"] = cal.kappa();
  out["T1_us"] = t1.T1;
  out["T1_err_us"] = t1.error;
  if (!c.fit_report.empty()) {
    nlohmann::ordered_json eff = nlohmann::ordered_json::array();
    for (const auto& r : decode_fit_report(read_file(c.fit_report), c.fit_report)) {
      const auto n = static_cast<std::uint64_t>(std::llround(r.t / dt));
      if (n == 0 || !(r.tau_best > 0.0)) continue;
      const EfficiencyEstimate e = estimate_efficiency(r.tau_best, cal, n);
      eff.push_back({{"t_us", r.t}, {"eta", e.eta}, {"above_one", e.above_one}});
      if (e.above_one) log << "warning: efficiency above 1 at t_us=" << format_double(r.t) << "\n";
    }
    out["efficiency"] = std::move(eff);
  }
  write_file_atomic(c.output, out.dump(2) + "\n");
  write_manifest(c);
  log << "I0=" << format_double(cal.I0) << " I1=" << format_double(cal.I1) << " sigma=" << format_double(cal.sigma)
      << " T1_us=" << format_double(t1.T1) << "\n";
}

void cmd_report(RunConfig c, std::ostream& log) {
  require_output(c);
  const Observed obs = observe(c);
  std::vector<double> taus;
  if (!c.fit_report.empty()) {
    const auto fits = decode_fit_report(read_file(c.fit_report), c.fit_report);
    for (double t : obs.times) {
      const FitResult* match = nullptr;
      for (const auto& f : fits) {
        if (std::abs(f.t - t) <= 1e-9 * std::max(1.0, t)) match = &f;
      }
      if (!match) throw UsageError("fit report has no slice at t_us=" + format_double(t));
      taus.push_back(match->tau_best);
    }
  } else {
    RunConfig fc = c;
    fc.model = "fp";
    for (const auto& r : fit_tau(obs.snapshots, make_model(fc, obs.times), scan_of(c))) taus.push_back(r.tau_best);
  }
  RunConfig fc = c;
  fc.model = "fp";
  const ModelFn best = make_model(fc, obs.times);
  constexpr std::size_t w = 26;
  for (std::size_t j = 0; j < obs.snapshots.size(); ++j) {
    const auto& o = obs.snapshots[j];
    const DistributionSnapshot m = best(j, taus[j]);
    const DistributionSnapshot a = analytic_snapshot(c.x0, taus[j], c.n_bins, c.bin_width);
    std::string out = "# t_us=" + format_double(obs.times[j]) + "\n# tau=" + format_double(taus[j]) +
                      "\n# T1_us=" + format_double(c.T1_us) + "\n# x0=" + format_double(c.x0) + "\n";
    out += "# mass0 observed=" + format_double(o.mass0) + " best_fit=" + format_double(m.mass0) +
           " no_relaxation=" + format_double(a.mass0) + "\n";
    out += "# mass1 observed=" + format_double(o.mass1) + " best_fit=" + format_double(m.mass1) +
           " no_relaxation=" + format_double(a.mass1) + "\n";
    out += pad("bin_center", w) + pad("observed", w) + pad("observed_error", w) + pad("best_fit", w) +
           "no_relaxation\n";
    for (std::size_t k = 0; k < o.n_bins; ++k) {
      out += pad(format_double(o.bin_center(k)), w) + pad(format_double(o.density[k]), w) +
             pad(format_double(o.errors[k]), w) + pad(format_double(m.density[k]), w) + format_double(a.density[k]) +
             "\n";
    }
    write_file_atomic(slice_path(c, j, ".txt"), out);
    log << "slice " << j << " t_us=" << format_double(obs.times[j]) << " tau=" << format_double(taus[j])
        << " chi2(best_fit)=" << format_double(chi2(o, m)) << "\n";
  }
  write_manifest(c);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    if (const char* env = std::getenv("QTRAJ_THREADS")) {
      char* end = nullptr;
      const long n = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || n < 1) throw UsageError("QTRAJ_THREADS must be a positive integer");
      omp_set_num_threads(static_cast<int>(n));
    }
    auto config = parse_command_line(argc, argv);
    if (!config) return 0;
    const std::string& cmd = config->command;
    if (cmd == "generate") {
      cmd_generate(*config, out);
    } else if (cmd == "simulate") {
      cmd_simulate(*config, out);
    } else if (cmd == "solve-fp") {
      cmd_solve_fp(*config, out);
    } else if (cmd == "reconstruct") {
      cmd_reconstruct(*config, out);
    } else if (cmd == "fit") {
      cmd_fit(*config, out);
    } else if (cmd == "calibrate") {
      cmd_calibrate(*config, out);
    } else {
      cmd_report(*config, out);
    }
    return 0;
  } catch (const UsageError& e) {
    err << "qtraj: usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "qtraj: usage error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "qtraj: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "qtraj: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qtraj
