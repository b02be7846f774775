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

#include "qtraj/fokker_planck.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qtraj/stats.h"

namespace qtraj {

namespace {

// Mass of N(mu, sd^2) on (a, b], evaluated from the nearer tail.
double gauss_interval(double a, double b, double mu, double sd) {
  if (b <= a) return 0.0;
  if (sd == 0.0) return (mu > a && mu <= b) ? 1.0 : 0.0;
  const double ua = (a - mu) / sd;
  const double ub = (b - mu) / sd;
  if (ua >= 0.0) return normal_cdf(-ua) - normal_cdf(-ub);
  if (ub <= 0.0) return normal_cdf(ub) - normal_cdf(ua);
  return 1.0 - normal_cdf(ua) - normal_cdf(-ub);
}

// z of a histogram bin edge at rho (unclamped; +-inf at the ends).
double edge_z(double rho) {
  if (rho <= 0.0) return -kInfinity;
  if (rho >= 1.0) return kInfinity;
  return 0.5 * (std::log(rho) - std::log1p(-rho));
}

// Smallest z whose rho00 view rounds to exactly 1.0 (histogram mass1).
double z_rounding_to_one() {
  static const double z1 = [] {
    double lo = 0.0, hi = kZCap;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (to_rho(mid) == 1.0 ? hi : lo) = mid;
    }
    return hi;
  }();
  return z1;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Exact relaxation flow in z over exponent delta.
inline double relax_z(double z, double delta) {
  if (z == kInfinity) return z;
  const double b = std::log(std::expm1(delta));
  if (z == -kInfinity) return 0.5 * b;
  const double a = 2.0 * z + delta;
  const double hi = std::max(a, b);
  return 0.5 * (hi + std::log1p(std::exp(std::min(a, b) - hi)));
}

}  // namespace

DensityGrid DensityGrid::uniform(Coordinate coordinate, double lower, double upper, std::size_t n_cells) {
  if (n_cells == 0 || !(upper > lower)) throw std::invalid_argument("DensityGrid: empty or inverted grid");
  DensityGrid g;
  g.coordinate = coordinate;
  g.lower = lower;
  g.upper = upper;
  g.weights.assign(n_cells, 0.0);
  g.nodes.resize(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) g.nodes[i] = g.edge(i) + 0.5 * g.cell_width();
  return g;
}

double DensityGrid::total_mass() const {
  double s = mass0 + mass1;
  for (double w : weights) s += w;
  return s;
}

double DensityGrid::mean_rho() const {
  double s = mass1;
  for (std::size_t i = 0; i < n_cells(); ++i) {
    if (weights[i] == 0.0) continue;
    if (coordinate == Coordinate::kRho) {
      s += weights[i] * nodes[i];
    } else {
      // Average of (1 + tanh z)/2 over the cell: [softplus(2z)]/(2 dz).
      const double a = edge(i), b = edge(i + 1);
      s += weights[i] * (softplus(2.0 * b) - softplus(2.0 * a)) / (2.0 * (b - a));
    }
  }
  return s;
}

double GaussianMixture::pdf(double z) const {
  if (is_delta()) return 0.0;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  const double dp = z - z_plus, dm = z - z_minus;
  return norm * (weight_plus * std::exp(-dp * dp / (2.0 * variance)) +
                 weight_minus * std::exp(-dm * dm / (2.0 * variance)));
}

double GaussianMixture::mass(double a, double b) const {
  const double sd = std::sqrt(variance);
  return weight_plus * gauss_interval(a, b, z_plus, sd) + weight_minus * gauss_interval(a, b, z_minus, sd);
}

GaussianMixture analytic_distribution_z(double x0, double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::domain_error("analytic_distribution_z: tau must be >= 0");
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw std::domain_error("analytic_distribution_z: x0 outside [0,1]");
  GaussianMixture m;
  if (x0 == 0.0 || x0 == 1.0) {
    m.z_plus = m.z_minus = x0 == 1.0 ? kZCap : -kZCap;
    m.variance = 0.0;
    m.weight_plus = x0;
    m.weight_minus = 1.0 - x0;
    return m;
  }
  const double z0 = to_logodds(x0);
  m.z_plus = z0 + tau;
  m.z_minus = z0 - tau;
  m.variance = tau;
  m.weight_plus = x0;
  m.weight_minus = 1.0 - x0;
  return m;
}

double RhoDensity::operator()(double rho) const {
  if (!(rho > 0.0 && rho < 1.0) || mixture_.is_delta()) return 0.0;
  const double z = edge_z(rho);
  const double v = mixture_.variance;
  const double dp = z - mixture_.z_plus, dm = z - mixture_.z_minus;
  const double log_jac = std::log(2.0 * rho * (1.0 - rho));
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * v);
  return mixture_.weight_plus * std::exp(norm - dp * dp / (2.0 * v) - log_jac) +
         mixture_.weight_minus * std::exp(norm - dm * dm / (2.0 * v) - log_jac);
}

RhoDensity analytic_distribution_rho(double x0, double tau) { return RhoDensity(analytic_distribution_z(x0, tau)); }

DistributionSnapshot analytic_snapshot(double x0, double tau, std::size_t n_bins, double bin_width) {
  const GaussianMixture m = analytic_distribution_z(x0, tau);
  DistributionSnapshot out(n_bins, bin_width);
  out.validate();
  if (m.is_delta()) {
    auto place = [&](double z, double w) {
      if (w == 0.0) return;
      const double rho = to_rho(z);
      if (rho <= 0.0) {
        out.mass0 += w;
      } else if (rho >= 1.0) {
        out.mass1 += w;
      } else {
        out.density[std::min(static_cast<std::size_t>(rho / bin_width), n_bins - 1)] += w;
      }
    };
    place(m.z_plus, m.weight_plus);
    place(m.z_minus, m.weight_minus);
    return out;
  }
  // Same conventions as a simulated histogram: rho00 that rounds to 1.0 is
  // mass1, states on the lower cap are mass0.
  const double z_hi = z_rounding_to_one();
  const double z_lo = -kZCap;
  out.mass0 = m.mass(-kInfinity, z_lo);
  out.mass1 = m.mass(z_hi, kInfinity);
  double lo = z_lo;
  for (std::size_t k = 0; k < n_bins; ++k) {
    double hi = std::min(edge_z(static_cast<double>(k + 1) * bin_width), z_hi);
    if (hi > lo) out.density[k] = m.mass(lo, hi);
    lo = std::max(lo, hi);
  }
  return out;
}

DensityGrid delta_initial(double x0, const FpOptions& options) {
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw std::domain_error("delta_initial: x0 outside [0,1]");
  DensityGrid g = DensityGrid::uniform(Coordinate::kZ, -options.z_max, options.z_max, options.cells);
  if (x0 == 0.0) {
    g.mass0 = 1.0;
    return g;
  }
  if (x0 == 1.0) {
    g.mass1 = 1.0;
    return g;
  }
  const double width = 2.0 * g.cell_width();
  const GaussianMixture m = analytic_distribution_z(x0, width * width);
  g.mass0 = m.mass(-kInfinity, g.lower);
  g.mass1 = m.mass(g.upper, kInfinity);
  for (std::size_t i = 0; i < g.n_cells(); ++i) g.weights[i] = m.mass(g.edge(i), g.edge(i + 1));
  return g;
}

DensityGrid to_z_grid(const DensityGrid& grid, const FpOptions& options) {
  if (grid.coordinate == Coordinate::kZ) return grid;
  if (grid.lower < 0.0 || grid.upper > 1.0) throw std::invalid_argument("to_z_grid: rho grid must lie within [0,1]");
  DensityGrid out = DensityGrid::uniform(Coordinate::kZ, -options.z_max, options.z_max, options.cells);
  out.t = grid.t;
  out.mass0 = grid.mass0;
  out.mass1 = grid.mass1;
  // rho-edges of the z-cells; each source cell is uniform in rho.
  const double rho_lo = to_rho(out.lower), rho_hi = to_rho(out.upper);
  for (std::size_t j = 0; j < grid.n_cells(); ++j) {
    const double m = grid.weights[j];
    if (m == 0.0) continue;
    const double a = grid.edge(j), b = grid.edge(j + 1);
    const double len = b - a;
    out.mass0 += m * std::clamp((rho_lo - a) / len, 0.0, 1.0);
    out.mass1 += m * std::clamp((b - rho_hi) / len, 0.0, 1.0);
    const double za = std::max(edge_z(a), out.lower), zb = std::min(edge_z(b), out.upper);
    if (!(zb > za)) continue;
    auto first = static_cast<std::size_t>(std::floor((za - out.lower) / out.cell_width()));
    first = std::min(first, out.n_cells() - 1);
    for (std::size_t i = first; i < out.n_cells() && out.edge(i) < zb; ++i) {
      const double ra = std::max(to_rho(out.edge(i)), a);
      const double rb = std::min(to_rho(out.edge(i + 1)), b);
      if (rb > ra) out.weights[i] += m * (rb - ra) / len;
    }
  }
  return out;
}

namespace {

// Crank-Nicolson finite-volume integrator for the measurement operator in
// tau units: dp/dtau = (1/2) p'' - (tanh(z) p)'. Ghost cells beyond the grid
// are empty, so the boundary faces carry outflow only.
class MeasurementStepper {
 public:
  explicit MeasurementStepper(const DensityGrid& grid) : n_(grid.n_cells()) {
    const double dz = grid.cell_width();
    const double diff = 0.5 / (dz * dz);
    // Face f sits between cells f-1 and f (f = 0..n).
    std::vector<double> alpha(n_ + 1), beta(n_ + 1);
    for (std::size_t f = 0; f <= n_; ++f) {
      const double v = std::tanh(grid.edge(f));
      alpha[f] = v / (2.0 * dz) + diff;
      beta[f] = v / (2.0 * dz) - diff;
    }
    lower_.resize(n_);
    diag_.resize(n_);
    upper_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      lower_[i] = alpha[i];
      diag_[i] = beta[i] - alpha[i + 1];
      upper_[i] = -beta[i + 1];
    }
    out_left_ = -beta[0];
    out_right_ = alpha[n_];
  }

  void set_step(double h) {
    if (h == h_) return;
    h_ = h;
    const double c = 0.5 * h;
    cprime_.resize(n_);
    inv_denom_.resize(n_);
    double prev_c = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double a = i > 0 ? -c * lower_[i] : 0.0;
      const double b = 1.0 - c * diag_[i];
      const double up = i + 1 < n_ ? -c * upper_[i] : 0.0;
      const double denom = b - a * prev_c;
      inv_denom_[i] = 1.0 / denom;
      cprime_[i] = up * inv_denom_[i];
      prev_c = cprime_[i];
    }
  }

  // One CN step. Returns the (left, right) outflow over the step.
  std::pair<double, double> step(std::vector<double>& m) {
    const double c = 0.5 * h_;
    rhs_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double am = diag_[i] * m[i];
      if (i > 0) am += lower_[i] * m[i - 1];
      if (i + 1 < n_) am += upper_[i] * m[i + 1];
      rhs_[i] = m[i] + c * am;
    }
    const double old_left = m.front(), old_right = m.back();
    double prev = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double a = i > 0 ? -c * lower_[i] : 0.0;
      prev = (rhs_[i] - a * prev) * inv_denom_[i];
      m[i] = prev;
    }
    for (std::size_t i = n_ - 1; i-- > 0;) m[i] -= cprime_[i] * m[i + 1];
    return {c * out_left_ * (old_left + m.front()), c * out_right_ * (old_right + m.back())};
  }

 private:
  std::size_t n_;
  std::vector<double> lower_, diag_, upper_;
  double out_left_ = 0.0, out_right_ = 0.0;
  double h_ = -1.0;
  std::vector<double> cprime_, inv_denom_, rhs_;
};

// Monotonized-central slopes of the cell densities, as the dimensionless
// tilt c of each cell's normalised profile 1 + c (t - 1/2), t in [0, 1].
// The limiter keeps both edge values nonnegative (|c| <= 2).
void limited_tilts(const std::vector<double>& w, std::vector<double>& tilt) {
  const std::size_t n = w.size();
  tilt.assign(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (w[i] <= 0.0) continue;
    const double l = w[i] - w[i - 1], r = w[i + 1] - w[i];
    if (l * r <= 0.0) continue;
    const double mag = std::min({2.0 * std::abs(l), 0.5 * std::abs(w[i + 1] - w[i - 1]), 2.0 * std::abs(r)});
    tilt[i] = std::copysign(mag, l) / w[i];
  }
}

// Pushes every cell through the exact relaxation flow and deposits its
// linear profile over the image interval. The flow contracts and is close
// to affine on a cell, so the profile stays linear in the image.
void relax_remap(DensityGrid& grid, double delta, std::vector<double>& scratch, std::vector<double>& images,
                 std::vector<double>& tilt) {
  if (delta <= 0.0) return;
  const std::size_t n = grid.n_cells();
  const double dz = grid.cell_width();
  images.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) images[j] = relax_z(grid.edge(j), delta);
  limited_tilts(grid.weights, tilt);
  scratch.assign(n, 0.0);
  double to_upper = 0.0;
  // Mass fraction of the profile between t1 and t2.
  auto share = [](double t1, double t2, double c) {
    return (t2 - t1) + 0.5 * c * ((t2 - 0.5) * (t2 - 0.5) - (t1 - 0.5) * (t1 - 0.5));
  };
  auto deposit = [&](double a, double b, double m, double c) {
    if (m == 0.0) return;
    if (a >= grid.upper) {
      to_upper += m;
      return;
    }
    const double len = b - a;
    if (!(len > 0.0)) {
      auto k = static_cast<std::size_t>(std::floor((a - grid.lower) / dz));
      scratch[std::min(k, n - 1)] += m;
      return;
    }
    double end = b;
    if (b > grid.upper) {
      to_upper += m * share((grid.upper - a) / len, 1.0, c);
      end = grid.upper;
    }
    auto k = static_cast<std::size_t>(std::floor((a - grid.lower) / dz));
    k = std::min(k, n - 1);
    double pos = a;
    while (pos < end && k < n) {
      const double seg_hi = std::min(end, grid.edge(k + 1));
      scratch[k] += m * share((pos - a) / len, (seg_hi - a) / len, c);
      pos = seg_hi;
      ++k;
    }
  };
  for (std::size_t i = 0; i < n; ++i) deposit(images[i], images[i + 1], grid.weights[i], tilt[i]);
  // Mass parked below the grid is rho00 ~ 0; its image starts at the
  // relaxed ground-state limit.
  const double mass0 = grid.mass0;
  grid.mass0 = 0.0;
  const double start = relax_z(-kInfinity, delta);
  if (start < grid.lower) {
    grid.mass0 = mass0 * std::clamp((grid.lower - start) / (images[0] - start), 0.0, 1.0);
    deposit(grid.lower, images[0], mass0 - grid.mass0, 0.0);
  } else {
    deposit(start, images[0], mass0, 0.0);
  }
  grid.weights.swap(scratch);
  grid.mass1 += to_upper;
}

void check_health(const DensityGrid& grid, double reference_mass) {
  for (double w : grid.weights) {
    if (w < -1e-12) throw FpFailure("solve_fp: negative density " + std::to_string(w));
  }
  const double drift = std::abs(grid.total_mass() - reference_mass);
  if (drift > 1e-8) throw FpFailure("solve_fp: mass drift " + std::to_string(drift));
}

std::vector<DensityGrid> solve_impl(const DensityGrid& initial, double g, double T1, std::span<const double> t_grid,
                                    const FpOptions& options, double tau_credit) {
  if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("solve_fp: g must be finite and >= 0");
  if (!(T1 > 0.0)) throw std::invalid_argument("solve_fp: T1 must be > 0 (or infinite)");
  if (!(options.cn_step_factor > 0.0) || !(options.max_outer_delta > 0.0) || !(options.max_outer_kappa > 0.0)) {
    throw std::invalid_argument("solve_fp: step limits must be positive");
  }
  DensityGrid grid = to_z_grid(initial, options);
  if (grid.n_cells() < 3) throw std::invalid_argument("solve_fp: grid too small");
  const double reference_mass = grid.total_mass();
  const double dz = grid.cell_width();

  MeasurementStepper stepper(grid);
  std::vector<double> scratch, images, tilt;
  std::vector<DensityGrid> out;
  out.reserve(t_grid.size());
  double t = grid.t;
  for (double t_next : t_grid) {
    if (!(t_next >= t)) throw std::invalid_argument("solve_fp: t_grid must be nondecreasing and >= initial time");
    const double span = t_next - t;
    double kappa = g * span;
    if (kappa > 0.0 && tau_credit > 0.0) {
      const double used = std::min(kappa, tau_credit);
      kappa -= used;
      tau_credit -= used;
    }
    const double delta = std::isinf(T1) ? 0.0 : span / T1;
    const auto n_outer = static_cast<std::size_t>(std::max(
        {1.0, std::ceil(delta / options.max_outer_delta), std::ceil(kappa / options.max_outer_kappa)}));
    const double outer_kappa = kappa / static_cast<double>(n_outer);
    const double outer_delta = delta / static_cast<double>(n_outer);
    std::size_t n_sub = 0;
    if (outer_kappa > 0.0) {
      n_sub = static_cast<std::size_t>(std::ceil(outer_kappa / (options.cn_step_factor * dz * dz)));
      stepper.set_step(outer_kappa / static_cast<double>(n_sub));
    }
    if (span > 0.0) {
      // Adjacent relaxation halves compose exactly and are applied as one map.
      double pending = 0.0;
      for (std::size_t k = 0; k < n_outer; ++k) {
        pending += 0.5 * outer_delta;
        if (n_sub > 0) {
          relax_remap(grid, pending, scratch, images, tilt);
          pending = 0.0;
        }
        for (std::size_t s = 0; s < n_sub; ++s) {
          auto [left, right] = stepper.step(grid.weights);
          grid.mass0 += left;
          grid.mass1 += right;
        }
        pending += 0.5 * outer_delta;
        check_health(grid, reference_mass);
      }
      relax_remap(grid, pending, scratch, images, tilt);
      check_health(grid, reference_mass);
    }
    t = t_next;
    grid.t = t;
    out.push_back(grid);
  }
  return out;
}

}  // namespace

std::vector<DensityGrid> solve_fp(const DensityGrid& initial, double g, double T1, std::span<const double> t_grid,
                                  const FpOptions& options) {
  return solve_impl(initial, g, T1, t_grid, options, 0.0);
}

std::vector<DensityGrid> solve_fp(double x0, double g, double T1, std::span<const double> t_grid,
                                  const FpOptions& options) {
  // delta_initial already carries tau = (2 dz)^2 of measurement.
  const double width = 2.0 * (2.0 * options.z_max / static_cast<double>(options.cells));
  return solve_impl(delta_initial(x0, options), g, T1, t_grid, options, width * width);
}

DistributionSnapshot fp_snapshot_to_bins(const DensityGrid& grid, std::size_t n_bins, double bin_width) {
  DistributionSnapshot out(n_bins, bin_width);
  out.validate();
  out.t = grid.t;
  out.mass0 = grid.mass0;
  out.mass1 = grid.mass1;
  auto bin_edge = [&](std::size_t k) {
    const double rho = static_cast<double>(k) * bin_width;
    return grid.coordinate == Coordinate::kZ ? edge_z(rho) : std::min(rho, 1.0);
  };
  // Both sequences are sorted: sweep cells and bins together.
  std::size_t k = 0;
  for (std::size_t i = 0; i < grid.n_cells(); ++i) {
    const double m = grid.weights[i];
    const double a = grid.edge(i), b = grid.edge(i + 1);
    while (k + 1 < n_bins && bin_edge(k + 1) <= a) ++k;
    if (m == 0.0) continue;
    const double len = b - a;
    double pos = a;
    std::size_t kk = k;
    while (pos < b) {
      const double hi = kk + 1 < n_bins ? std::min(b, bin_edge(kk + 1)) : b;
      out.density[kk] += m * (hi - pos) / len;
      pos = hi;
      if (kk + 1 >= n_bins) break;
      ++kk;
    }
  }
  return out;
}

}  // namespace qtraj
