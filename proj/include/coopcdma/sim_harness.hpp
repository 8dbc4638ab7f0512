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

#include "coopcdma/mmse_designer.hpp"
#include "coopcdma/signal_model.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coopcdma {

enum class Scheme { Ncis, Cis, JpaisGpc, JpaisIpc };
enum class Variant { Exact, Adaptive };

std::string to_string(Scheme s);
std::string to_string(Variant v);
Scheme parse_scheme(const std::string& s);
Variant parse_variant(const std::string& s);

struct ExperimentConfig {
  SystemDims dims;
  std::vector<double> snr_db{0, 3, 6, 9, 12, 15, 18};
  std::vector<int> user_grid{2, 4, 6, 8};
  std::vector<Scheme> schemes{Scheme::Ncis, Scheme::Cis, Scheme::JpaisGpc, Scheme::JpaisIpc};
  Variant variant = Variant::Exact;
  int trials = 100;
  int training_len = 200;
  int power_warmup = 0;  // symbols before the adaptive power recursion starts
  double alpha = 0.998;
  double lambda = 0.025;    // individual constraint
  double lambda_T = 0.025;  // global constraint
  std::uint64_t seed = 1;
  double shadowing_std_db = 3.0;
  double user_power = 1.0;  // P_{A,k}; P_T = K P_{A,k}
  int max_iters = 50;
  double tol = 1e-6;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  MmseConfig mmse() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Ground truth and every random sequence of one trial, independent of scheme and SNR.
struct TrialScenario {
  LinkEnsemble links;
  std::vector<std::vector<Complex>> symbols;        // [user][i]
  std::vector<std::vector<std::array<int, 2>>> bits;  // [user][i]
  std::vector<Eigen::MatrixXcd> destination_noise;  // [hop]  window x P, unit variance
  std::vector<Eigen::MatrixXcd> relay_noise;        // [relay] window x P, unit variance
  std::vector<Eigen::VectorXcd> estimator_init;     // [user] small random channel start
};

TrialScenario make_trial(const SystemDims& dims, std::uint64_t seed, std::uint64_t trial,
                         double shadowing_std_db);

struct PacketResult {
  long bit_errors = 0;
  long payload_bits = 0;
  std::vector<int> symbol_errors;  // bit errors at every symbol index (all users)
  bool diverged = false;
  std::string divergence;
  double max_constraint_violation = 0.0;
  std::vector<Eigen::VectorXd> final_amplitudes;
  /// Adaptive variant: ||h_hat - h|| / ||h|| over every user and hop once training ends.
  double training_channel_error = 0.0;
};

/// Simulates one packet: training symbols first, then decision-directed
/// (adaptive) or fixed exact-MMSE detection. Errors are counted on the payload.
PacketResult run_packet(const ExperimentConfig& cfg, Scheme scheme, double snr_db,
                        const TrialScenario& trial);

struct BerPoint {
  double x = 0.0;
  double ber_mean = 0.0;
  double ber_stderr = 0.0;
  long bit_count = 0;
  int diverged = 0;
};

struct BerCurve {
  std::string x_name;
  Scheme scheme = Scheme::Ncis;
  Variant variant = Variant::Exact;
  std::vector<BerPoint> rows;
  ExperimentConfig config;
};

/// BER versus SNR for one scheme.
BerCurve run_experiment(const ExperimentConfig& cfg, Scheme scheme);
/// BER versus SNR for every scheme in cfg.schemes, sharing channels and noise.
std::vector<BerCurve> run_snr_sweep(const ExperimentConfig& cfg);
/// BER versus K at a single SNR for every scheme in cfg.schemes.
std::vector<BerCurve> run_user_sweep(const ExperimentConfig& cfg, double snr_db);
/// Per-symbol BER (x = symbol number, 1-based) averaged over trials and users.
std::vector<BerCurve> run_learning_curve(const ExperimentConfig& cfg, double snr_db);
/// BER over symbols [first, last) of the packet, per scheme.
BerCurve run_window_ber(const ExperimentConfig& cfg, Scheme scheme, double snr_db, int first,
                        int last);
/// Equal-power cooperative baseline.
BerCurve run_baseline_cis(const ExperimentConfig& cfg);

/// Largest K on each curve's grid whose BER is at or below the target.
std::map<Scheme, std::optional<int>> capacity_at_target(const std::vector<BerCurve>& curves,
                                                        double target_ber);

/// Exact-design inputs for a scheme (NCIS strips the relay hops).
DesignScenario design_scenario(const ExperimentConfig& cfg, Scheme scheme, double snr_db,
                               const TrialScenario& trial);

double noise_variance(double snr_db, double user_power);

}  // namespace coopcdma
