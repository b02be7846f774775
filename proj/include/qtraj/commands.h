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


#ifndef QTRAJ_COMMANDS_H
#define QTRAJ_COMMANDS_H

#include <iosfwd>

#include "qtraj/config.h"

namespace qtraj {

// Each command writes its outputs atomically plus OUTPUT.manifest, and
// reports a one-line summary per artefact on `log`.
void cmd_generate(RunConfig config, std::ostream& log);
void cmd_simulate(RunConfig config, std::ostream& log);
void cmd_solve_fp(RunConfig config, std::ostream& log);
void cmd_reconstruct(RunConfig config, std::ostream& log);
void cmd_fit(RunConfig config, std::ostream& log);
void cmd_calibrate(RunConfig config, std::ostream& log);
void cmd_report(RunConfig config, std::ostream& log);

/// Entry point of the qtraj executable. Returns 0 on success, 2 on usage
/// errors and 1 on any other failure. QTRAJ_THREADS, when set, fixes the
/// OpenMP thread count.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qtraj

#endif  // QTRAJ_COMMANDS_H
