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


#ifndef QTRAJ_CONFIG_H
#define QTRAJ_CONFIG_H

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtraj/core.h"

namespace qtraj {

/// Bad flags, missing or out-of-range parameters. Maps to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fully resolved settings of one run. Times are in microseconds.
struct RunConfig {
  std::string command;

  std::optional<std::uint64_t> seed;
  std::uint64_t n_traj = 1000;
  std::uint64_t n_steps = 80;
  double dt_us = 0.5;
  double g = 0.01;  // 1/us
  double T1_us = kInfinity;
  double x0 = 0.5;
  std::uint64_t record_every = 1;
  std::string integrator = "trotter";
  std::uint64_t em_substeps = 1;

  double I0 = 1.0;
  double I1 = -1.0;
  double sigma = 1.0;
  double dts_us = 0.0;
  double eta = 1.0;

  std::string slices_us;  // comma-separated times; empty means the final slice
  std::uint64_t n_bins = 100;
  double bin_width = 0.01;

  std::string model = "fp";  // analytic | fp | ensemble
  std::uint64_t model_n_traj = 100000;
  std::uint64_t model_seed = 1;
  double tau_min = 0.0;
  double tau_max = 2.5;
  double tau_step = 0.01;
  std::uint64_t fp_cells = 4096;
  double fp_z_max = 12.0;

  double x0_range = 0.0;
  double T1_range_us = 0.0;
  double I0_range = 0.0;
  double I1_range = 0.0;

  std::string input;
  std::string output;
  std::string latent;
  std::string records;
  std::string fit_report;
  std::string ground;
  std::string excited;
  bool text = false;

  /// Keys set on the command line or in a config file.
  std::set<std::string> explicit_keys;
  bool given(const std::string& key) const { return explicit_keys.count(key) != 0; }

  std::vector<double> slice_times() const;
};

const std::vector<std::string>& command_names();

/// argv[1] is the command; remaining arguments are --key=value flags and an
/// optional --config=FILE of `key = value` lines. Flags override the file.
/// Returns nullopt after printing help.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv);

/// `key = value` text of every setting; loadable through --config.
std::string encode_manifest(const RunConfig& config);

std::string usage_text();

}  // namespace qtraj

#endif  // QTRAJ_CONFIG_H
