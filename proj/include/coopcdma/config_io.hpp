// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "coopcdma/sim_harness.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace coopcdma {

inline constexpr const char* kVersionTag = "coopcdma 1.0.0";

/// Configuration problem tied to one key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Applies `key = value` pairs over `base`. Unknown keys and bad values throw ConfigError.
ExperimentConfig apply_settings(ExperimentConfig base,
                                const std::vector<std::pair<std::string, std::string>>& settings);

/// Parses a flat key=value text ('#' starts a comment). Later duplicates win.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Resolved config in the same key=value format.
std::string emit_config(const ExperimentConfig& cfg);

/// Shortest round-trip-safe decimal form (17 significant digits).
std::string format_number(double v);

struct RunManifest {
  ExperimentConfig config;
  std::string command;
  std::string version = kVersionTag;
  double wall_time_s = 0.0;
  std::map<std::string, int> divergences;  // per scheme
  std::vector<std::string> outputs;
};

std::string curves_to_csv(const std::vector<BerCurve>& curves);
std::string curves_to_json(const std::vector<BerCurve>& curves, const RunManifest& manifest);
std::string manifest_to_json(const RunManifest& manifest);

/// Divergence counts summed per scheme.
std::map<std::string, int> divergence_counts(const std::vector<BerCurve>& curves);

/// Writes the result file and `<path>.manifest.json` next to it. Format is csv or json.
void write_results(const std::vector<BerCurve>& curves, RunManifest manifest,
                   const std::string& path, const std::string& format);

}  // namespace coopcdma
