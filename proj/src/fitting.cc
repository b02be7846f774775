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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <tuple>

#include <boost/math/tools/toms748_solve.hpp>

#include "parallel.h"
#include "qtraj/sde.h"

namespace qtraj {

double chi2(const DistributionSnapshot& observed, const DistributionSnapshot& model) {
  if (observed.n_bins != model.n_bins || observed.bin_width != model.bin_width ||
      observed.density.size() != model.density.size()) {
    throw std::invalid_argument("chi2: binning mismatch");
  }
  observed.validate();
  double s = 0.0;
  auto term = [&](double o, double m, double eo, double em) {
    const double var = eo * eo + em * em;
    if (!(var > 0.0)) throw std::invalid_argument("chi2: zero error in a compared bin");
    const double r = o - m;
    s += r * r / var;
  };
  for (std::size_t k = 0; k < observed.n_bins; ++k) {
    term(observed.density[k], model.density[k], observed.errors[k], model.errors[k]);
  }
  if (observed.mass0 > 0.0 || model.mass0 > 0.0) {
    term(observed.mass0, model.mass0, observed.mass0_error, model.mass0_error);
  }
  if (observed.mass1 > 0.0 || model.mass1 > 0.0) {
    term(observed.mass1, model.mass1, observed.mass1_error, model.mass1_error);
  }
  return s;
}

std::vector<double> TauScan::grid() const {
  if (!(tau_step > 0.0) || !(tau_max > tau_min) || tau_min < 0.0) {
    throw std::invalid_argument("TauScan: need 0 <= tau_min < tau_max and tau_step > 0");
  }
  const auto n = static_cast<std::size_t>(std::floor((tau_max - tau_min) / tau_step + 1e-9)) + 1;
  if (n < 3) throw std::invalid_argument("TauScan: need at least three grid points");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = tau_min + static_cast<double>(i) * tau_step;
  return g;
}

namespace {

// Crossing of chi2 = level between a (chi2 fa >= level) and b (chi2 fb < level).
// Model evaluations can be expensive, so the endpoint values are reused.
double find_crossing(const std::function<double(double)>& f, double a, double fa, double b, double fb,
                     double level) {
  if (fa == level) return a;
  if (a > b) {
    std::swap(a, b);
    std::swap(fa, fb);
  }
  auto g = [&](double tau) { return f(tau) - level; };
  auto close = [](double lo, double hi) { return hi - lo <= 1e-9 * std::max(1.0, std::abs(hi)); };
  std::uintmax_t max_iter = 60;
  const auto [lo, hi] = boost::math::tools::toms748_solve(g, a, b, fa - level, fb - level, close, max_iter);
  return 0.5 * (lo + hi);
}

struct Interval {
  double half_width = 0.0;
  bool open = false;
};

Interval error_interval(const std::function<double(double)>& f, const FitResult& fit, double delta) {
  const double level = fit.chi2_min + delta;
  const auto& scan = fit.scan;
  Interval out;
  // Left side.
  double left = scan.front().first;
  bool found = false;
  for (std::size_t i = scan.size(); i-- > 0;) {
    if (scan[i].first >= fit.tau_best) continue;
    if (scan[i].second >= level) {
      double inner = fit.tau_best, f_inner = fit.chi2_min;
      if (i + 1 < scan.size() && scan[i + 1].first < fit.tau_best) std::tie(inner, f_inner) = scan[i + 1];
      left = find_crossing(f, scan[i].first, scan[i].second, inner, f_inner, level);
      found = true;
      break;
    }
  }
  if (!found) out.open = true;
  double right = scan.back().first;
  found = false;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (scan[i].first <= fit.tau_best) continue;
    if (scan[i].second >= level) {
      double inner = fit.tau_best, f_inner = fit.chi2_min;
      if (i > 0 && scan[i - 1].first > fit.tau_best) std::tie(inner, f_inner) = scan[i - 1];
      right = find_crossing(f, scan[i].first, scan[i].second, inner, f_inner, level);
      found = true;
      break;
    }
  }
  if (!found) out.open = true;
  out.half_width = 0.5 * (right - left);
  return out;
}

}  // namespace

std::vector<FitResult> fit_tau(std::span<const DistributionSnapshot> observed, const ModelFn& model,
                               const TauScan& scan) {
  const std::vector<double> grid = scan.grid();
  const std::size_t n_slices = observed.size();
  const std::size_t n_grid = grid.size();
  std::vector<double> values(n_slices * n_grid);
  internal::parallel_for(static_cast<std::int64_t>(n_slices * n_grid), [&](std::int64_t task) {
    const auto j = static_cast<std::size_t>(task) / n_grid;
    const auto i = static_cast<std::size_t>(task) % n_grid;
    values[static_cast<std::size_t>(task)] = chi2(observed[j], model(j, grid[i]));
  });

  std::vector<FitResult> results(n_slices);
  internal::parallel_for(static_cast<std::int64_t>(n_slices), [&](std::int64_t jj) {
    const auto j = static_cast<std::size_t>(jj);
    FitResult& r = results[j];
    r.t = observed[j].t;
    r.n_bins = observed[j].n_bins;
    r.scan.resize(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) r.scan[i] = {grid[i], values[j * n_grid + i]};
    auto f = [&](double tau) { return chi2(observed[j], model(j, tau)); };

    const auto best = static_cast<std::size_t>(
        std::min_element(r.scan.begin(), r.scan.end(),
                         [](const auto& a, const auto& b) { return a.second < b.second; }) -
        r.scan.begin());
    r.tau_best = r.scan[best].first;
    r.chi2_min = r.scan[best].second;
    if (best == 0 || best + 1 == n_grid) {
      r.minimum_at_edge = true;
    } else {
      const double x0 = r.scan[best - 1].first, x1 = r.scan[best].first, x2 = r.scan[best + 1].first;
      const double y0 = r.scan[best - 1].second, y1 = r.scan[best].second, y2 = r.scan[best + 1].second;
      const double denom = (y0 - 2.0 * y1 + y2);
      if (denom > 0.0) {
        const double vertex = std::clamp(x1 + 0.5 * (x2 - x1) * (y0 - y2) / denom, x0, x2);
        const double cv = f(vertex);
        if (cv <= r.chi2_min) {
          r.tau_best = vertex;
          r.chi2_min = cv;
        }
      }
    }
    const Interval wide = error_interval(f, r, 100.0);
    const Interval narrow = error_interval(f, r, 1.0);
    r.tau_error = wide.half_width;
    r.tau_error_dchi2_1 = narrow.half_width;
    r.error_open_ended = wide.open || narrow.open;
  });
  return results;
}

ModelFn analytic_model(double x0, std::size_t n_bins, double bin_width) {
  return [=](std::size_t, double tau) { return analytic_snapshot(x0, tau, n_bins, bin_width); };
}

ModelFn fp_model(double x0, double T1, std::vector<double> slice_times, FpOptions options, std::size_t n_bins,
                 double bin_width) {
  return [=](std::size_t slice, double tau) {
    const double t = slice_times.at(slice);
    if (t == 0.0) {
      auto s = analytic_snapshot(x0, 0.0, n_bins, bin_width);
      s.t = t;
      return s;
    }
    const double times[] = {t};
    const auto grids = solve_fp(x0, tau / t, T1, times, options);
    return fp_snapshot_to_bins(grids.back(), n_bins, bin_width);
  };
}

ModelFn ensemble_model(double x0, double T1, double dt, std::vector<double> slice_times, std::uint64_t n_traj,
                       SeedSpec seeds, std::size_t n_bins, double bin_width) {
  return [=](std::size_t slice, double tau) {
    const double t = slice_times.at(slice);
    const auto n_steps = static_cast<std::uint64_t>(std::llround(t / dt));
    if (n_steps == 0) {
      auto s = analytic_snapshot(x0, 0.0, n_bins, bin_width);
      s.t = t;
      return s;
    }
    ModelParams p;
    p.g = tau / t;
    p.T1 = T1;
    p.dt = dt;
    p.x0 = x0;
    p.n_steps = n_steps;
    SimulationOptions opt;
    opt.record_every = n_steps;
    const auto ens = simulate_ensemble(p, n_traj, seeds, opt);
    return build_histogram(ens, 1, n_bins, bin_width);
  };
}

void ErrorBudget::apply(DistributionSnapshot& snapshot) const {
  if (snapshot.n_bins != total.size()) throw std::invalid_argument("ErrorBudget::apply: binning mismatch");
  snapshot.errors = total;
  snapshot.mass0_error = std::hypot(mass0_statistical, mass0_systematic);
  snapshot.mass1_error = std::hypot(mass1_statistical, mass1_systematic);
}

std::vector<ErrorBudget> systematic_errors(const RecordSet& records, const CalibrationParams& cal, double x0,
                                           const FluctuationRanges& ranges, std::span<const std::uint64_t> slices,
                                           std::size_t n_bins, double bin_width) {
  if (ranges.x0 < 0.0 || ranges.T1 < 0.0 || ranges.I0 < 0.0 || ranges.I1 < 0.0) {
    throw std::invalid_argument("systematic_errors: fluctuation ranges must be >= 0");
  }
  for (auto s : slices) {
    if (s > records.n_steps) throw std::out_of_range("systematic_errors: slice out of range");
  }
  auto histograms = [&](const CalibrationParams& c, double x) {
    const TrajectoryEnsemble ens = reconstruct_ensemble(records, c, x);
    std::vector<DistributionSnapshot> out;
    out.reserve(slices.size());
    for (auto s : slices) out.push_back(build_histogram(ens, s, n_bins, bin_width));
    return out;
  };
  const auto base = histograms(cal, x0);

  std::vector<ErrorBudget> budgets(slices.size());
  for (std::size_t j = 0; j < slices.size(); ++j) {
    ErrorBudget& b = budgets[j];
    b.statistical = base[j].errors;
    b.mass0_statistical = base[j].mass0_error;
    b.mass1_statistical = base[j].mass1_error;
    b.systematic.assign(n_bins, 0.0);
    for (auto& c : b.contributions) c.assign(n_bins, 0.0);
  }
  std::array<double, 4> mass0_sq{}, mass1_sq{};
  std::vector<std::array<double, 4>> m0(slices.size()), m1(slices.size());

  for (int p = 0; p < 4; ++p) {
    const double range = p == 0 ? ranges.x0 : p == 1 ? ranges.T1 : p == 2 ? ranges.I0 : ranges.I1;
    if (range == 0.0) continue;
    if (p == 1 && std::isinf(cal.T1)) continue;
    for (double sign : {-1.0, 1.0}) {
      CalibrationParams c = cal;
      double x = x0;
      switch (p) {
        case 0:
          x = std::clamp(x0 + sign * range, 0.0, 1.0);
          break;
        case 1:
          c.T1 = cal.T1 + sign * range;
          if (!(c.T1 > 0.0)) throw std::invalid_argument("systematic_errors: T1 range exceeds T1");
          break;
        case 2:
          c.I0 = cal.I0 + sign * range;
          break;
        default:
          c.I1 = cal.I1 + sign * range;
          break;
      }
      const auto shifted = histograms(c, x);
      for (std::size_t j = 0; j < slices.size(); ++j) {
        auto& contrib = budgets[j].contributions[static_cast<std::size_t>(p)];
        for (std::size_t k = 0; k < n_bins; ++k) {
          const double d = shifted[j].density[k] - base[j].density[k];
          contrib[k] += 0.5 * d * d;
        }
        const double d0 = shifted[j].mass0 - base[j].mass0;
        const double d1 = shifted[j].mass1 - base[j].mass1;
        m0[j][static_cast<std::size_t>(p)] += 0.5 * d0 * d0;
        m1[j][static_cast<std::size_t>(p)] += 0.5 * d1 * d1;
      }
    }
  }
  (void)mass0_sq;
  (void)mass1_sq;
  for (std::size_t j = 0; j < slices.size(); ++j) {
    ErrorBudget& b = budgets[j];
    b.total.assign(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k) {
      double sq = 0.0;
      for (auto& c : b.contributions) {
        sq += c[k];
        c[k] = std::sqrt(c[k]);
      }
      b.systematic[k] = std::sqrt(sq);
      b.total[k] = std::hypot(b.statistical[k], b.systematic[k]);
    }
    b.mass0_systematic = std::sqrt(m0[j][0] + m0[j][1] + m0[j][2] + m0[j][3]);
    b.mass1_systematic = std::sqrt(m1[j][0] + m1[j][1] + m1[j][2] + m1[j][3]);
  }
  return budgets;
}

}  // namespace qtraj
