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

#ifndef QTRAJ_RNG_H
#define QTRAJ_RNG_H

#include <array>
#include <cstdint>

namespace qtraj {

/// Philox4x32-10 block function (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// Master seed for a run. Trajectory i reads its variates from a substream
/// keyed by (master_seed, i, step), so results never depend on scheduling.
struct SeedSpec {
  std::uint64_t master_seed = 0;
};

/// Separates the variate streams of unrelated consumers sharing a seed.
enum class StreamDomain : std::uint8_t {
  kSimulation = 1,
  kRecords = 2,
  kHerald = 3,
  kEulerMaruyama = 4,
  kTest = 200,
};

/// Deterministic variates for one (trajectory, step) cell.
///
/// Each call to uniform() consumes 64 bits; blocks are generated lazily by
/// advancing the block index in the counter.
class NoiseStream {
 public:
  NoiseStream(SeedSpec seed, std::uint64_t trajectory, std::uint64_t step,
              StreamDomain domain = StreamDomain::kSimulation);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter counter_;
  PhiloxCounter block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qtraj

#endif  // QTRAJ_RNG_H
