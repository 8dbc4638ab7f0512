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

#include "coopcdma/types.hpp"

#include <vector>

namespace coopcdma {

enum class PowerMode { Global, Individual };

struct MmseConfig {
  double lambda_global = 0.025;
  double lambda_individual = 0.025;
  int max_iters = 50;
  double tol = 1e-6;

  void validate() const;
};

/// What the designer knows about one user: its stacked signature C_k H_k
/// (one column per hop), the same signature spilled from the previous and the
/// next symbol, and the correlation rho_j = E[s_j b*] of every hop's symbol
/// with the source symbol (rho_0 = 1; relays forward unit-energy estimates).
struct DesignUser {
  Eigen::MatrixXcd signature;
  Eigen::MatrixXcd spill_previous;
  Eigen::MatrixXcd spill_next;
  Eigen::VectorXd relay_correlation;

  Index hops() const { return signature.cols(); }
  /// E[s s^H] for the hop symbols: unit diagonal, rho_j rho_j' elsewhere.
  Eigen::MatrixXd symbol_correlation() const;
};

/// Everything needed for the closed-form statistics of one scenario.
struct DesignScenario {
  std::vector<DesignUser> users;
  double noise_variance = 0.0;
  Eigen::VectorXd budgets;  // P_{A,k} per user

  Index dim() const { return users.front().signature.rows(); }
  int hops() const { return int(users.front().hops()); }
  int num_users() const { return int(users.size()); }
  double total_budget() const { return budgets.sum(); }
};

/// Closed-form second-order statistics of the received vector.
///
/// `power_cov` / `power_cross` hold one entry for the global mode (stacked
/// K(n_r+1) dimension) or one per user for the individual mode. They are only
/// filled when filters are supplied.
struct EnsembleStatistics {
  Eigen::MatrixXcd covariance;  // R
  Eigen::MatrixXcd cross;       // column k: E[r b_k^*]
  std::vector<Eigen::MatrixXcd> power_cov;
  std::vector<Eigen::VectorXcd> power_cross;
};

/// Equal power per link: every entry sqrt(P_{A,k} / (n_r+1)).
std::vector<Eigen::VectorXd> equal_power(const DesignScenario& scn);

/// Flattens per-user amplitude vectors user-major into the global vector a_T.
Eigen::VectorXd stack_amplitudes(const std::vector<Eigen::VectorXd>& amps);
std::vector<Eigen::VectorXd> unstack_amplitudes(const Eigen::VectorXd& stacked, int hops);

EnsembleStatistics build_statistics(const DesignScenario& scn,
                                    const std::vector<Eigen::VectorXd>& amps);
EnsembleStatistics build_statistics(const DesignScenario& scn,
                                    const std::vector<Eigen::VectorXd>& amps,
                                    const Eigen::MatrixXcd& filters, PowerMode mode);

/// W = R^-1 P. Throws NumericalError when R is ill-conditioned.
Eigen::MatrixXcd receiver_global(const EnsembleStatistics& stats);
Eigen::VectorXcd receiver_individual(const EnsembleStatistics& stats, int user);

/// Projects onto the sphere ||a||^2 = budget after taking entry magnitudes.
Eigen::VectorXd project_to_sphere(const Eigen::VectorXcd& a, double budget);

/// a_T = (R_a + lambda I)^-1 p_a followed by the sphere projection.
Eigen::VectorXd power_global(const EnsembleStatistics& stats, double lambda, double budget);
Eigen::VectorXd power_individual(const EnsembleStatistics& stats, double lambda, int user,
                                 double budget);

/// Per-user MSE E|b_k - w_k^H r|^2 for arbitrary filters.
Eigen::VectorXd user_mse(const EnsembleStatistics& stats, const Eigen::MatrixXcd& filters);
/// Sum over users of the MMSE (filters re-optimised for the amplitudes).
double ensemble_mse(const DesignScenario& scn, const std::vector<Eigen::VectorXd>& amps);

struct AlternationResult {
  Eigen::MatrixXcd filters;
  std::vector<Eigen::VectorXd> amplitudes;
  double initial_mse = 0.0;        // equal-power start
  std::vector<double> mse_trace;   // one entry per completed iteration
  int iterations = 0;
  bool converged = false;
};

/// Alternates the filter step and the power step from the equal-power start.
/// Non-convergence is reported through `converged`, never thrown.
AlternationResult alternate(const DesignScenario& scn, const MmseConfig& cfg, PowerMode mode);

}  // namespace coopcdma
