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


#include "qtraj/config.h"

#include <algorithm>
#include <functional>
#include <iostream>
#include <variant>

#include "CLI11.hpp"
#include "qtraj/io.h"

namespace qtraj {

namespace {

using Field = std::variant<double*, std::uint64_t*, std::string*, bool*, std::optional<std::uint64_t>*>;

struct Key {
  const char* name;
  Field field;
  const char* help;
};

std::vector<Key> keys_of(RunConfig& c) {
  return {
      {"seed", &c.seed, "master seed (required by generate and simulate)"},
      {"n_traj", &c.n_traj, "number of trajectories"},
      {"n_steps", &c.n_steps, "steps per trajectory"},
      {"dt_us", &c.dt_us, "step duration"},
      {"g", &c.g, "measurement coupling in 1/us"},
      {"T1_us", &c.T1_us, "relaxation time ('inf' disables relaxation)"},
      {"x0", &c.x0, "initial rho00"},
      {"record_every", &c.record_every, "store every k-th step"},
      {"integrator", &c.integrator, "trotter | euler"},
      {"em_substeps", &c.em_substeps, "Euler-Maruyama substeps per step"},
      {"I0", &c.I0, "ground-state current centre"},
      {"I1", &c.I1, "excited-state current centre"},
      {"sigma", &c.sigma, "per-step current standard deviation"},
      {"dts_us", &c.dts_us, "heralding measurement duration"},
      {"eta", &c.eta, "amplifier efficiency used by generate"},
      {"slices_us", &c.slices_us, "comma-separated slice times; empty selects the last slice"},
      {"n_bins", &c.n_bins, "histogram bins"},
      {"bin_width", &c.bin_width, "histogram bin width"},
      {"model", &c.model, "fit model: analytic | fp | ensemble"},
      {"model_n_traj", &c.model_n_traj, "trajectories of the ensemble model"},
      {"model_seed", &c.model_seed, "seed of the ensemble model"},
      {"tau_min", &c.tau_min, "tau scan start"},
      {"tau_max", &c.tau_max, "tau scan end"},
      {"tau_step", &c.tau_step, "tau scan step"},
      {"fp_cells", &c.fp_cells, "Fokker-Planck grid cells"},
      {"fp_z_max", &c.fp_z_max, "Fokker-Planck grid half-width in z"},
      {"x0_range", &c.x0_range, "systematic fluctuation of x0"},
      {"T1_range_us", &c.T1_range_us, "systematic fluctuation of T1"},
      {"I0_range", &c.I0_range, "systematic fluctuation of I0"},
      {"I1_range", &c.I1_range, "systematic fluctuation of I1"},
      {"input", &c.input, "input file"},
      {"output", &c.output, "output file or prefix"},
      {"latent", &c.latent, "latent ensemble output of generate (default OUTPUT.latent)"},
      {"records", &c.records, "record file for the systematic error budget of fit"},
      {"fit_report", &c.fit_report, "fit report consumed by report"},
      {"ground", &c.ground, "ground-state calibration records"},
      {"excited", &c.excited, "excited-state calibration records"},
      {"text", &c.text, "write record files as text"},
  };
}

std::string quote(const std::string& s) {
  if (s.find('\'') != std::string::npos || s.find('\n') != std::string::npos) {
    throw UsageError("value cannot be written to a manifest: " + s);
  }
  return "'" + s + "'";
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"generate", "simulate",  "solve-fp", "reconstruct",
                                                 "fit",      "calibrate", "report"};
  return names;
}

std::vector<double> RunConfig::slice_times() const {
  std::vector<double> out;
  std::string_view s = slices_us;
  while (!s.empty()) {
    const auto p = s.find(',');
    const auto tok = s.substr(0, p);
    try {
      out.push_back(parse_double(tok));
    } catch (const std::invalid_argument&) {
      throw UsageError("slices_us: bad time '" + std::string(tok) + "'");
    }
    if (!(out.back() >= 0.0) || !std::isfinite(out.back())) throw UsageError("slices_us: times must be >= 0");
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

std::string usage_text() {
  std::string s = "usage: qtraj <command> [--config=FILE] [--key=value ...]\ncommands:";
  for (const auto& n : command_names()) s += " " + n;
  s += "\nrun 'qtraj <command> --help' for the keys.\n";
  return s;
}

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv) {
  if (argc < 2) throw UsageError(usage_text());
  RunConfig config;
  config.command = argv[1];
  if (config.command == "--help" || config.command == "-h") {
    std::cout << usage_text();
    return std::nullopt;
  }
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), config.command) == names.end()) {
    throw UsageError("unknown command '" + config.command + "'\n" + usage_text());
  }

  CLI::App app("qtraj " + config.command, "qtraj " + config.command);
  app.set_config("--config", "", "file of key = value lines");
  app.allow_config_extras(false);
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::uint64_t seed_value = 0;
  for (auto& key : keys_of(config)) {
    const std::string flag = std::string("--") + key.name;
    CLI::Option* opt = std::visit(
        [&](auto* p) -> CLI::Option* {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
            return app.add_option(flag, seed_value, key.help);
          } else if constexpr (std::is_same_v<T, bool>) {
            return app.add_option(flag, *p, key.help)->expected(0, 1)->default_str("false");
          } else {
            return app.add_option(flag, *p, key.help);
          }
        },
        key.field);
    options.emplace_back(key.name, opt);
  }
  std::vector<std::string> args;
  for (int i = argc - 1; i >= 2; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()));
  }
  for (const auto& [name, opt] : options) {
    if (opt->count() > 0) config.explicit_keys.insert(name);
  }
  if (config.given("seed")) config.seed = seed_value;
  return config;
}

std::string encode_manifest(const RunConfig& config) {
  RunConfig copy = config;
  std::string out = "# qtraj " + config.command + " manifest; rerun with --config=<this file>\n";
  for (auto& key : keys_of(copy)) {
    std::string value;
    bool skip = false;
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            value = format_double(*p);
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            value = std::to_string(*p);
          } else if constexpr (std::is_same_v<T, std::string>) {
            value = quote(*p);
          } else if constexpr (std::is_same_v<T, bool>) {
            value = *p ? "true" : "false";
          } else {
            if (p->has_value()) {
              value = std::to_string(**p);
            } else {
              skip = true;
            }
          }
        },
        key.field);
    if (!skip) out += std::string(key.name) + " = " + value + "\n";
  }
  return out;
}

}  // namespace qtraj
