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

#include "qtraj/bayesian.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "qtraj/sde.h"

namespace qtraj {

MeasurementRecord RecordSet::measurement(std::uint64_t traj) const {
  auto r = record(traj);
  return MeasurementRecord{std::vector<double>(r.begin(), r.end()), cal.dt};
}

void RecordSet::validate() const {
  cal.validate();
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw std::invalid_argument("RecordSet: x0 outside [0,1]");
  if (currents.size() != n_traj * n_steps) throw std::invalid_argument("RecordSet: current count != n_traj * n_steps");
  for (double c : currents) {
    if (!std::isfinite(c)) throw std::invalid_argument("RecordSet: non-finite current");
  }
}

EfficiencyModel EfficiencyModel::from_observed(double sigma_obs, double eta) {
  if (!(sigma_obs > 0.0)) throw std::invalid_argument("EfficiencyModel: sigma_obs must be > 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("EfficiencyModel: eta must lie in (0,1]");
  EfficiencyModel m;
  m.sigma_obs = sigma_obs;
  m.eta = eta;
  m.sigma_ideal = sigma_obs * std::sqrt(eta);
  m.sigma_noise = sigma_obs * std::sqrt(1.0 - eta);
  return m;
}

EfficiencyModel EfficiencyModel::from_components(double sigma_ideal, double sigma_noise) {
  if (!(sigma_ideal > 0.0) || !(sigma_noise >= 0.0)) throw std::invalid_argument("EfficiencyModel: bad components");
  EfficiencyModel m;
  m.sigma_ideal = sigma_ideal;
  m.sigma_noise = sigma_noise;
  m.sigma_obs = std::hypot(sigma_ideal, sigma_noise);
  m.eta = sigma_ideal * sigma_ideal / (m.sigma_obs * m.sigma_obs);
  return m;
}

QubitState update_measurement(QubitState state, double Im, double I0, double I1, double sigma) {
  if (state.at_cap()) return state;
  return QubitState::from_z(state.z() + (I0 - I1) * (2.0 * Im - I0 - I1) / (4.0 * sigma * sigma));
}

QubitState update_measurement(QubitState state, double Im, const CalibrationParams& cal) {
  return update_measurement(state, Im, cal.I0, cal.I1, cal.sigma);
}

QubitState update_relaxation(QubitState state, double dt, double T1) {
  if (!(dt >= 0.0)) throw std::domain_error("update_relaxation: dt < 0");
  if (!(T1 > 0.0)) throw std::domain_error("update_relaxation: T1 must be > 0");
  if (std::isinf(T1)) return state;
  return step_relaxation_exact(state, dt / T1);
}

namespace {

void check_record(const MeasurementRecord& record, const CalibrationParams& cal) {
  cal.validate();
  if (std::abs(record.dt - cal.dt) > 1e-12 * std::max(1.0, std::abs(cal.dt))) {
    throw std::invalid_argument("reconstruct_trajectory: record dt differs from calibration dt");
  }
}

template <typename CurrentsFn>
void reconstruct_into(std::span<const double> currents, const CalibrationParams& cal, double x0, CurrentsFn&& eig,
                      double* out) {
  QubitState s = QubitState::from_rho(x0);
  out[0] = s.rho00();
  const double half = 0.5 * cal.dt;
  for (std::size_t k = 0; k < currents.size(); ++k) {
    const auto [i0, i1] = eig(k);
    s = update_relaxation(s, half, cal.T1);
    s = update_measurement(s, currents[k], i0, i1, cal.sigma);
    s = update_relaxation(s, half, cal.T1);
    out[k + 1] = s.rho00();
  }
}

}  // namespace

std::vector<double> reconstruct_trajectory(const MeasurementRecord& record, const CalibrationParams& cal, double x0) {
  check_record(record, cal);
  std::vector<double> out(record.currents.size() + 1);
  reconstruct_into(record.currents, cal, x0, [&](std::size_t) { return std::pair{cal.I0, cal.I1}; }, out.data());
  return out;
}

std::vector<double> reconstruct_trajectory(const MeasurementRecord& record, const CalibrationParams& cal, double x0,
                                           const EffectiveCalibration& effective) {
  check_record(record, cal);
  if (effective.I0.size() != record.currents.size() || effective.I1.size() != record.currents.size()) {
    throw std::invalid_argument("reconstruct_trajectory: effective calibration length differs from record length");
  }
  std::vector<double> out(record.currents.size() + 1);
  reconstruct_into(
      record.currents, cal, x0, [&](std::size_t k) { return std::pair{effective.I0[k], effective.I1[k]}; },
      out.data());
  return out;
}

TrajectoryEnsemble reconstruct_ensemble(const RecordSet& records, const CalibrationParams& cal, double x0) {
  cal.validate();
  if (records.currents.size() != records.n_traj * records.n_steps) {
    throw std::invalid_argument("reconstruct_ensemble: malformed record set");
  }
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw std::invalid_argument("reconstruct_ensemble: x0 outside [0,1]");
  TrajectoryEnsemble out(records.n_traj, records.n_steps, cal.dt);
  const auto n = static_cast<std::int64_t>(records.n_traj);
  auto eig = [&](std::size_t) { return std::pair{cal.I0, cal.I1}; };
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto traj = static_cast<std::uint64_t>(i);
    reconstruct_into(records.record(traj), cal, x0, eig, &out.at(traj, 0));
  }
  return out;
}

TrajectoryEnsemble reconstruct_ensemble(const RecordSet& records) {
  return reconstruct_ensemble(records, records.cal, records.x0);
}

TrajectoryEnsemble reconstruct_ensemble_serial(const RecordSet& records, const CalibrationParams& cal, double x0) {
  cal.validate();
  if (records.currents.size() != records.n_traj * records.n_steps) {
    throw std::invalid_argument("reconstruct_ensemble: malformed record set");
  }
  TrajectoryEnsemble out(records.n_traj, records.n_steps, cal.dt);
  auto eig = [&](std::size_t) { return std::pair{cal.I0, cal.I1}; };
  for (std::uint64_t i = 0; i < records.n_traj; ++i) reconstruct_into(records.record(i), cal, x0, eig, &out.at(i, 0));
  return out;
}

GeneratedData generate_records(const ModelParams& params, const CalibrationParams& cal, std::uint64_t n_traj,
                               SeedSpec seeds, double eta) {
  params.validate();
  cal.validate();
  if (n_traj == 0) throw std::invalid_argument("generate_records: n_traj must be >= 1");
  if (params.n_steps > 0xFFFFFFFFull) throw std::invalid_argument("generate_records: too many steps");
  const EfficiencyModel eff = EfficiencyModel::from_observed(cal.sigma, eta);
  const double kappa_latent = cal.kappa() / eta;
  if (std::abs(params.g * params.dt - kappa_latent) > 1e-9 * std::max(1.0, kappa_latent)) {
    throw std::invalid_argument("generate_records: g * dt must equal (I0 - I1)^2 / (4 sigma^2) / eta");
  }
  if (std::abs(params.dt - cal.dt) > 1e-12 * std::max(1.0, cal.dt)) {
    throw std::invalid_argument("generate_records: model and calibration dt differ");
  }
  if (params.T1 != cal.T1) throw std::invalid_argument("generate_records: model and calibration T1 differ");

  GeneratedData data;
  data.records.cal = cal;
  data.records.x0 = params.x0;
  data.records.master_seed = seeds.master_seed;
  data.records.n_traj = n_traj;
  data.records.n_steps = params.n_steps;
  data.records.currents.assign(n_traj * params.n_steps, 0.0);
  data.latent = TrajectoryEnsemble(n_traj, params.n_steps, params.dt);

  const double half = 0.5 * cal.dt;
  const auto n = static_cast<std::int64_t>(n_traj);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto traj = static_cast<std::uint64_t>(i);
    double* currents = data.records.currents.data() + traj * params.n_steps;
    QubitState s = QubitState::from_rho(params.x0);
    data.latent.at(traj, 0) = s.rho00();
    for (std::uint64_t k = 0; k < params.n_steps; ++k) {
      NoiseStream noise(seeds, traj, k, StreamDomain::kRecords);
      s = update_relaxation(s, half, cal.T1);
      const double centre = noise.uniform() < s.rho00() ? cal.I0 : cal.I1;
      const double ideal = centre + eff.sigma_ideal * noise.normal();
      s = update_measurement(s, ideal, cal.I0, cal.I1, eff.sigma_ideal);
      s = update_relaxation(s, half, cal.T1);
      currents[k] = eta == 1.0 ? ideal : ideal + eff.sigma_noise * noise.normal();
      data.latent.at(traj, k + 1) = s.rho00();
    }
  }
  return data;
}

GaussianFit fit_gaussian_current(std::span<const double> samples) {
  if (samples.size() < 100) throw std::invalid_argument("fit_gaussian_current: need at least 100 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  if (!(ss > 0.0)) throw std::invalid_argument("fit_gaussian_current: samples have zero variance");
  GaussianFit f;
  f.n = samples.size();
  f.center = mean;
  f.sigma = std::sqrt(ss / (n - 1.0));
  f.center_error = f.sigma / std::sqrt(n);
  f.sigma_error = f.sigma / std::sqrt(2.0 * n);
  return f;
}

double ExponentialFit::operator()(double t) const { return asymptote + amplitude * std::exp(-rate * t); }

namespace {

struct RateScan {
  double lo = 0.0;  // log-rate bounds
  double hi = 0.0;
};

RateScan rate_range(std::span<const double> t) {
  const auto [tmin, tmax] = std::minmax_element(t.begin(), t.end());
  const double span = *tmax - *tmin;
  double min_dt = span;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double d = std::abs(t[i] - t[i - 1]);
    if (d > 0.0) min_dt = std::min(min_dt, d);
  }
  if (!(span > 0.0)) throw FitFailure("exponential fit: time base has zero span");
  return {std::log(0.01 / span), std::log(100.0 / min_dt)};
}

// Minimises f(log k) on a log grid, then Brent between the grid neighbours.
// Throws when the grid minimum sits on either end (no resolvable rate).
template <typename F>
double minimise_log_rate(F&& f, RateScan range, const char* what) {
  constexpr int kGrid = 400;
  const double step = (range.hi - range.lo) / kGrid;
  int best = 0;
  double best_v = f(range.lo);
  for (int i = 1; i <= kGrid; ++i) {
    const double v = f(range.lo + i * step);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  if (best == 0 || best == kGrid) throw FitFailure(std::string(what) + ": no resolvable exponential decay");
  auto [x, fx] = boost::math::tools::brent_find_minima(f, range.lo + (best - 1) * step, range.lo + (best + 1) * step,
                                                       std::numeric_limits<double>::digits);
  (void)fx;
  return x;
}

bool has_spread(std::span<const double> y) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return *hi - *lo > 1e-14 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
}

// Linear least squares for (A, B) in y = A + B e^{-k t}.
std::array<double, 3> linear_part(std::span<const double> t, std::span<const double> y, double k) {
  double s1 = 0.0, se = 0.0, see = 0.0, sy = 0.0, sey = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = std::exp(-k * t[i]);
    s1 += 1.0;
    se += e;
    see += e * e;
    sy += y[i];
    sey += e * y[i];
  }
  const double det = s1 * see - se * se;
  if (!(std::abs(det) > 0.0)) return {0.0, 0.0, kInfinity};
  const double a = (see * sy - se * sey) / det;
  const double b = (s1 * sey - se * sy) / det;
  double rss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - a - b * std::exp(-k * t[i]);
    rss += r * r;
  }
  return {a, b, rss};
}

// Inverse of a symmetric positive-definite 3x3 matrix (row-major).
std::array<double, 9> invert3(const std::array<double, 9>& m) {
  std::array<double, 9> inv{};
  inv[0] = m[4] * m[8] - m[5] * m[7];
  inv[1] = m[2] * m[7] - m[1] * m[8];
  inv[2] = m[1] * m[5] - m[2] * m[4];
  inv[3] = m[5] * m[6] - m[3] * m[8];
  inv[4] = m[0] * m[8] - m[2] * m[6];
  inv[5] = m[2] * m[3] - m[0] * m[5];
  inv[6] = m[3] * m[7] - m[4] * m[6];
  inv[7] = m[1] * m[6] - m[0] * m[7];
  inv[8] = m[0] * m[4] - m[1] * m[3];
  const double det = m[0] * inv[0] + m[1] * inv[3] + m[2] * inv[6];
  if (!(std::abs(det) > 0.0)) throw FitFailure("exponential fit: singular normal matrix");
  for (double& v : inv) v /= det;
  return inv;
}

}  // namespace

ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size()) throw std::invalid_argument("fit_exponential: t and y lengths differ");
  if (t.size() < 4) throw FitFailure("fit_exponential: need at least 4 points");
  if (!has_spread(y)) throw FitFailure("fit_exponential: series is constant");
  const RateScan range = rate_range(t);
  const double log_k =
      minimise_log_rate([&](double lk) { return linear_part(t, y, std::exp(lk))[2]; }, range, "fit_exponential");
  ExponentialFit f;
  f.rate = std::exp(log_k);
  const auto lin = linear_part(t, y, f.rate);
  f.asymptote = lin[0];
  f.amplitude = lin[1];
  f.rss = lin[2];
  if (!std::isfinite(f.rss) || f.amplitude == 0.0) throw FitFailure("fit_exponential: degenerate fit");

  std::array<double, 9> jtj{};
  for (double ti : t) {
    const double e = std::exp(-f.rate * ti);
    const std::array<double, 3> j{1.0, e, -f.amplitude * ti * e};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) jtj[r * 3 + c] += j[r] * j[c];
    }
  }
  const auto cov = invert3(jtj);
  const double s2 = t.size() > 3 ? f.rss / static_cast<double>(t.size() - 3) : 0.0;
  f.asymptote_error = std::sqrt(std::max(0.0, s2 * cov[0]));
  f.amplitude_error = std::sqrt(std::max(0.0, s2 * cov[4]));
  f.rate_error = std::sqrt(std::max(0.0, s2 * cov[8]));
  return f;
}

T1Estimate estimate_T1(std::span<const double> times, std::span<const double> mean_current,
                       const CalibrationParams& cal) {
  if (times.size() != mean_current.size()) throw std::invalid_argument("estimate_T1: length mismatch");
  if (times.size() < 3) throw FitFailure("estimate_T1: need at least 3 points");
  if (!has_spread(mean_current)) throw FitFailure("estimate_T1: series does not decay");
  const double amp = cal.I1 - cal.I0;
  auto rss = [&](double k) {
    double s = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double r = mean_current[i] - cal.I0 - amp * std::exp(-k * times[i]);
      s += r * r;
    }
    return s;
  };
  double k = std::exp(minimise_log_rate([&](double lk) { return rss(std::exp(lk)); }, rate_range(times), "estimate_T1"));
  // Gauss-Newton polish in k.
  double jtj = 0.0;
  for (int it = 0; it < 20; ++it) {
    double jtr = 0.0;
    jtj = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double e = std::exp(-k * times[i]);
      const double r = mean_current[i] - cal.I0 - amp * e;
      const double j = -amp * times[i] * e;
      jtr += j * r;
      jtj += j * j;
    }
    if (!(jtj > 0.0)) throw FitFailure("estimate_T1: flat residual surface");
    const double step = jtr / jtj;
    const double next = k + step;
    if (!(next > 0.0)) break;
    k = next;
    if (std::abs(step) <= 1e-15 * k) break;
  }
  if (!(k > 0.0) || !std::isfinite(k)) throw FitFailure("estimate_T1: non-decaying series");
  const double dof = static_cast<double>(times.size() - 1);
  const double k_err = std::sqrt(rss(k) / dof / jtj);
  return T1Estimate{1.0 / k, k_err / (k * k)};
}

EffectiveCalibration preprocess_calibration(const CalibrationSeries& series) {
  const std::size_t n = series.t.size();
  if (n == 0 || series.I0.size() != n || series.I1.size() != n) {
    throw std::invalid_argument("preprocess_calibration: series columns differ in length");
  }
  constexpr double kTransientEnd = 2.0;
  constexpr double kI1Anchor = 2.5;
  if (series.t.back() - std::min(0.0, series.t.front()) < kI1Anchor) {
    throw std::invalid_argument("preprocess_calibration: series must span at least 2.5 us");
  }
  EffectiveCalibration out{series.I0, series.I1, {}};
  std::vector<double> tt, y0, y1;
  for (std::size_t i = 0; i < n; ++i) {
    if (series.t[i] > kTransientEnd) {
      tt.push_back(series.t[i]);
      y0.push_back(series.I0[i]);
      y1.push_back(series.I1[i]);
    }
  }
  try {
    const ExponentialFit f0 = fit_exponential(tt, y0);
    for (std::size_t i = 0; i < n; ++i) {
      if (series.t[i] > kTransientEnd) out.I0[i] = f0.asymptote;
    }
  } catch (const FitFailure& e) {
    out.warnings.push_back(std::string("I0 fit failed, using raw series: ") + e.what());
  }
  try {
    const ExponentialFit f1 = fit_exponential(tt, y1);
    const double anchored = f1(kI1Anchor);
    for (std::size_t i = 0; i < n; ++i) {
      if (series.t[i] > kTransientEnd) out.I1[i] = anchored;
    }
  } catch (const FitFailure& e) {
    out.warnings.push_back(std::string("I1 fit failed, using raw series: ") + e.what());
  }
  return out;
}

EfficiencyEstimate estimate_efficiency(double tau_fitted, const CalibrationParams& cal, std::uint64_t n_steps) {
  if (!(tau_fitted > 0.0)) throw std::domain_error("estimate_efficiency: tau_fitted must be > 0");
  EfficiencyEstimate e;
  e.eta = static_cast<double>(n_steps) * cal.kappa() / tau_fitted;
  e.above_one = e.eta > 1.0;
  return e;
}

double preparation_uncertainty(const CalibrationParams& cal) {
  if (std::isinf(cal.T1)) return 0.0;
  return -std::expm1(-cal.dts / cal.T1);
}

HeraldResult herald(QubitState state, const CalibrationParams& cal, NoiseStream& noise) {
  HeraldResult r;
  r.outcome = noise.uniform() < state.rho00() ? 0 : 1;
  r.prepared = QubitState::from_rho(r.outcome == 0 ? 1.0 : 0.0);
  r.uncertainty = preparation_uncertainty(cal);
  return r;
}

}  // namespace qtraj
