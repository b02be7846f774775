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


#ifndef QTRAJ_IO_H
#define QTRAJ_IO_H

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qtraj/bayesian.h"
#include "qtraj/core.h"
#include "qtraj/fitting.h"

namespace qtraj {

/// Malformed input. The message names the file and the line or byte offset.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to exactly x ("inf", "-inf", "nan" for non-finite).
std::string format_double(double x);
double parse_double(std::string_view text);

/// Writes to a sibling temporary file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

// Record files. Binary layout (little endian):
//   "QTRJREC1", version u32, n_traj u64, n_steps u64, dt_us f64, I0 f64,
//   I1 f64, sigma f64, T1_us f64, x0 f64, master_seed u64,
//   then n_traj * n_steps f64 currents, row-major by trajectory.
// The text form has one header line
//   # n_traj=.. n_steps=.. dt_us=.. I0=.. I1=.. sigma=.. T1_us=.. x0=.. master_seed=..
// followed by one comma-separated row per trajectory.
inline constexpr std::uint32_t kRecordVersion = 1;

std::string encode_records(const RecordSet& records);
std::string encode_records_text(const RecordSet& records);
RecordSet decode_records(std::string_view bytes, const std::string& name = "<records>");
void write_records(const std::filesystem::path& path, const RecordSet& records, bool text = false);
RecordSet read_records(const std::filesystem::path& path);

// Ensemble files: "QTRJENS1", version u32, n_traj u64, n_steps u64,
// dt_us f64, master_seed u64, then n_traj * (n_steps + 1) f64 rho00 values.
inline constexpr std::uint32_t kEnsembleVersion = 1;

struct EnsembleFile {
  TrajectoryEnsemble ensemble;
  std::uint64_t master_seed = 0;
};

std::string encode_ensemble(const EnsembleFile& file);
EnsembleFile decode_ensemble(std::string_view bytes, const std::string& name = "<ensemble>");
void write_ensemble(const std::filesystem::path& path, const EnsembleFile& file);
EnsembleFile read_ensemble(const std::filesystem::path& path);

// Histogram files: "# key=value" header lines (t_us, mass0, mass1,
// mass0_error, mass1_error, bin_width), then rows bin_center,density,error.
std::string encode_snapshot(const DistributionSnapshot& snapshot);
DistributionSnapshot decode_snapshot(std::string_view text, const std::string& name = "<histogram>");
void write_snapshot(const std::filesystem::path& path, const DistributionSnapshot& snapshot);
DistributionSnapshot read_snapshot(const std::filesystem::path& path);

// Fit reports: JSON {"slices": [{t_us, tau_best, chi2_min, tau_err_dchi2_100,
// tau_err_dchi2_1, n_bins, minimum_at_edge, error_open_ended}, ...]}.
std::string encode_fit_report(std::span<const FitResult> results);
std::vector<FitResult> decode_fit_report(std::string_view text, const std::string& name = "<fit report>");

}  // namespace qtraj

#endif  // QTRAJ_IO_H
