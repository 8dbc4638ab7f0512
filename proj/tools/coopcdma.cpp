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

#include "coopcdma/config_io.hpp"
#include "coopcdma/sim_harness.hpp"
#include "coopcdma/validate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace coopcdma;

namespace {

constexpr int kFullScaleTrials = 1000;
constexpr double kDefaultPointSnr = 12.0;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string snr;
  std::string users;
  std::optional<int> relays;
  std::string scheme;
  std::string variant;
  std::string out;
  std::string format = "csv";
  bool full_scale = false;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

/// Config file first, then flags on top, validated as one.
ExperimentConfig resolve(const Flags& f, const std::string& command) {
  ExperimentConfig base = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  std::vector<std::pair<std::string, std::string>> s;
  if (f.seed) s.emplace_back("seed", std::to_string(*f.seed));
  if (f.full_scale) s.emplace_back("trials", std::to_string(kFullScaleTrials));
  if (f.trials) s.emplace_back("trials", std::to_string(*f.trials));
  if (f.relays) s.emplace_back("relays", std::to_string(*f.relays));
  if (!f.scheme.empty()) s.emplace_back("schemes", f.scheme);
  if (!f.variant.empty()) s.emplace_back("variant", f.variant);
  if (command == "sweep-snr" && !f.snr.empty()) s.emplace_back("snr_db", f.snr);
  if (command == "sweep-users" && !f.users.empty()) s.emplace_back("user_grid", f.users);
  if (command != "sweep-users" && !f.users.empty()) {
    if (split(f.users).size() != 1) throw ConfigError("users", "expected a single value");
    s.emplace_back("users", f.users);
  }
  return apply_settings(base, s);
}

double point_snr(const Flags& f) {
  if (f.snr.empty()) return kDefaultPointSnr;
  if (split(f.snr).size() != 1) throw ConfigError("snr", "expected a single value");
  return parse_config("snr_db = " + f.snr).snr_db.front();
}

int emit(const std::vector<BerCurve>& curves, const ExperimentConfig& cfg, const Flags& f,
         const std::string& command, double seconds) {
  RunManifest m;
  m.config = cfg;
  m.command = command;
  m.wall_time_s = seconds;
  if (f.out.empty()) {
    if (f.format == "json") {
      m.divergences = divergence_counts(curves);
      std::cout << curves_to_json(curves, m);
    } else if (f.format == "csv") {
      std::cout << curves_to_csv(curves);
    } else {
      throw ConfigError("format", "expected csv or json, got '" + f.format + "'");
    }
  } else {
    write_results(curves, m, f.out, f.format);
    std::cerr << "wrote " << f.out << " and " << f.out << ".manifest.json\n";
  }
  for (const auto& [scheme, n] : divergence_counts(curves))
    if (n > 0) std::cerr << "warning: " << n << " diverged packets for " << scheme << "\n";
  return 0;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--trials", f.trials, "packets per grid point");
  app->add_option("--snr", f.snr, "SNR in dB (comma list for sweep-snr)");
  app->add_option("--users", f.users, "number of users (comma list for sweep-users)");
  app->add_option("--relays", f.relays, "number of relays");
  app->add_option("--scheme", f.scheme, "NCIS,CIS,JPAIS-GPC,JPAIS-IPC (comma list)");
  app->add_option("--variant", f.variant, "exact or adaptive");
  app->add_option("--out", f.out, "result file (a manifest is written next to it)");
  app->add_option("--format", f.format, "csv or json");
  app->add_flag("--full-scale", f.full_scale, "1000 packets per point");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative DS-CDMA power allocation and interference suppression simulator"};
  app.require_subcommand(1);
  Flags f;
  auto* snr = app.add_subcommand("sweep-snr", "BER versus SNR for each scheme");
  auto* users = app.add_subcommand("sweep-users", "BER versus number of users at one SNR");
  auto* learn = app.add_subcommand("learning-curve", "per-symbol BER of the adaptive variant");
  auto* check = app.add_subcommand("validate", "fast self-checks of recursions and invariants");
  for (auto* sub : {snr, users, learn, check}) add_common(sub, f);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    if (check->parsed()) {
      const ExperimentConfig cfg = resolve(f, "validate");
      bool ok = true;
      for (const CheckOutcome& c : run_self_checks(cfg.seed)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  (" << c.detail << ")\n";
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    }
    if (snr->parsed()) {
      const ExperimentConfig cfg = resolve(f, "sweep-snr");
      const auto curves = run_snr_sweep(cfg);
      return emit(curves, cfg, f, "sweep-snr", elapsed());
    }
    if (users->parsed()) {
      const ExperimentConfig cfg = resolve(f, "sweep-users");
      const auto curves = run_user_sweep(cfg, point_snr(f));
      return emit(curves, cfg, f, "sweep-users", elapsed());
    }
    if (learn->parsed()) {
      Flags lf = f;
      if (lf.variant.empty()) lf.variant = "adaptive";
      const ExperimentConfig cfg = resolve(lf, "learning-curve");
      const auto curves = run_learning_curve(cfg, point_snr(f));
      return emit(curves, cfg, lf, "learning-curve", elapsed());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
