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

#include "coopcdma/validate.hpp"

#include "coopcdma/config_io.hpp"
#include "coopcdma/rls.hpp"
#include "coopcdma/sim_harness.hpp"

#include <cmath>
#include <exception>
#include <functional>

namespace coopcdma {

namespace {

CheckOutcome guarded(const std::string& name, const std::function<CheckOutcome()>& f) {
  try {
    CheckOutcome c = f();
    c.name = name;
    return c;
  } catch (const std::exception& e) {
    return {name, false, std::string("exception: ") + e.what()};
  }
}

CheckOutcome rls_inverse(std::uint64_t seed) {
  const double alpha = 0.998, delta = 0.01;
  const Index dim = 2 * (8 + 3 - 1);
  Rng rng = make_stream(seed, 0, Stream::Scratch, 1);
  InverseCorrelation<Complex> phi(dim, delta);
  Eigen::MatrixXcd r = delta * Eigen::MatrixXcd::Identity(dim, dim);
  double worst = 0.0;
  for (int n = 1; n <= 200; ++n) {
    const Eigen::VectorXcd x = complex_gaussian_vector(rng, dim);
    phi.update(x, alpha);
    r = alpha * r + x * x.adjoint();
    const Eigen::MatrixXcd dense = r.inverse();
    worst = std::max(worst, (phi.matrix() - dense).norm() / dense.norm());
  }
  return {"", worst < 1e-8, "max relative error " + format_number(worst)};
}

CheckOutcome power_sphere(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.trials = 1;
  cfg.variant = Variant::Adaptive;
  cfg.dims.packet_len = 400;
  const TrialScenario t = make_trial(cfg.dims, seed, 0, cfg.shadowing_std_db);
  double worst = 0.0;
  for (Scheme s : {Scheme::JpaisGpc, Scheme::JpaisIpc}) {
    const PacketResult p = run_packet(cfg, s, 12.0, t);
    if (p.diverged) return {"", false, to_string(s) + " diverged: " + p.divergence};
    worst = std::max(worst, p.max_constraint_violation);
  }
  return {"", worst <= 1e-10, "max |‖a‖² - budget| " + format_number(worst)};
}

CheckOutcome alternation(std::uint64_t seed) {
  ExperimentConfig cfg;
  int wins = 0;
  const int draws = 5;
  for (int d = 0; d < draws; ++d) {
    const TrialScenario t = make_trial(cfg.dims, seed, std::uint64_t(d), cfg.shadowing_std_db);
    const DesignScenario scn = design_scenario(cfg, Scheme::JpaisGpc, 12.0, t);
    const AlternationResult alt = alternate(scn, cfg.mmse(), PowerMode::Global);
    if (ensemble_mse(scn, alt.amplitudes) <= alt.initial_mse + 1e-12) ++wins;
  }
  return {"", wins == draws, std::to_string(wins) + "/" + std::to_string(draws) + " draws"};
}

CheckOutcome direct_only(std::uint64_t seed) {
  ExperimentConfig with, without;
  with.dims.packet_len = without.dims.packet_len = 300;
  without.dims.relays = 0;
  const TrialScenario a = make_trial(with.dims, seed, 0, with.shadowing_std_db);
  const TrialScenario b = make_trial(without.dims, seed, 0, without.shadowing_std_db);
  const PacketResult p = run_packet(with, Scheme::Ncis, 6.0, a);
  const PacketResult q = run_packet(without, Scheme::JpaisIpc, 6.0, b);
  const bool same = p.symbol_errors == q.symbol_errors;
  return {"", same, "payload errors " + std::to_string(p.bit_errors) + " vs " +
                        std::to_string(q.bit_errors)};
}

CheckOutcome noise_free(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.dims.users = 1;
  cfg.dims.packet_len = 300;
  const TrialScenario t = make_trial(cfg.dims, seed, 0, cfg.shadowing_std_db);
  const PacketResult p = run_packet(cfg, Scheme::Cis, 300.0, t);
  return {"", p.bit_errors == 0 && !p.diverged,
          std::to_string(p.bit_errors) + " payload errors"};
}

CheckOutcome config_round_trip(std::uint64_t) {
  ExperimentConfig cfg;
  cfg.snr_db = {0.1, 7.25};
  cfg.alpha = 0.99;
  const bool same = parse_config(emit_config(cfg)) == cfg;
  return {"", same, same ? "identical" : "mismatch"};
}

}  // namespace

std::vector<CheckOutcome> run_self_checks(std::uint64_t seed) {
  return {
      guarded("rls_inverse_matches_dense", [&] { return rls_inverse(seed); }),
      guarded("power_norm_on_budget", [&] { return power_sphere(seed); }),
      guarded("alternation_not_above_equal_power", [&] { return alternation(seed); }),
      guarded("ncis_equals_direct_link_only", [&] { return direct_only(seed); }),
      guarded("noise_free_single_user_error_free", [&] { return noise_free(seed); }),
      guarded("config_round_trip", [&] { return config_round_trip(seed); }),
  };
}

}  // namespace coopcdma
