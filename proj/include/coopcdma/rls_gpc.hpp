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

#include "coopcdma/rls.hpp"
#include "coopcdma/signal_model.hpp"

#include <vector>

namespace coopcdma {

inline constexpr double kDefaultDelta = 0.01;

/// Source symbols of all users around the current interval. The destination
/// assumes every relay forwards the source symbol, so one value per user
/// stands for all hops. Unknown neighbours are zero.
struct SymbolContext {
  Eigen::VectorXcd current;
  Eigen::VectorXcd previous;
  Eigen::VectorXcd next;
  /// Optional K x (n_r+1) correlation of each forwarded symbol with the source
  /// symbol (column 0 is the direct link). Empty means every hop is exact.
  Eigen::MatrixXd reliability;

  double hop_reliability(Index user, Index hop) const {
    return reliability.size() == 0 ? 1.0 : reliability(user, hop);
  }
};

/// Convolution matrix of one user with its spilled images precomputed.
struct SpreadingBasis {
  Eigen::MatrixXd conv, previous, next;

  SpreadingBasis() = default;
  SpreadingBasis(const SpreadingCode& code, int taps);
};

/// Columns of user k's channel regressor C_k B_k A_k (plus adjacent-symbol
/// spill-over), one column per (hop, tap): (n_r+1)M x (n_r+1)L.
Eigen::MatrixXcd user_channel_regressor(const SpreadingBasis& basis, Complex current,
                                        Complex previous, Complex next,
                                        const Eigen::VectorXd& amps);

/// All users side by side: (n_r+1)M x K(n_r+1)L.
Eigen::MatrixXcd channel_regressor(const std::vector<SpreadingBasis>& bases,
                                   const SymbolContext& symbols,
                                   const std::vector<Eigen::VectorXd>& amps);

/// Places each length-L block of a per-user channel estimate into C_k H_k.
Eigen::MatrixXcd signature_from_channels(const SpreadingBasis& basis,
                                         const Eigen::VectorXcd& taps, int hops);

/// C_k H_k for the current symbol and its images spilled from the neighbours.
struct SignatureImages {
  Eigen::MatrixXcd current, previous, next;  // (n_r+1)M x (n_r+1)
};
SignatureImages signature_images(const SpreadingBasis& basis, const Eigen::VectorXcd& taps,
                                 int hops);

struct ReceiverRlsState {
  InverseCorrelation<Complex> phi;
  Eigen::MatrixXcd filters;  // (n_r+1)M x K
  double forgetting = 0.998;
};

struct PowerRlsState {
  InverseCorrelation<Complex> phi;
  Eigen::VectorXd amplitudes;  // stacked a_T, user-major
  double budget = 1.0;         // P_T
  double forgetting = 0.998;
  double max_violation = 0.0;  // largest | ||a||^2 - P_T | seen after a projection
  double regularization = 0.0;  // lambda_T, spread over one coordinate per symbol
  Index cursor = 0;
};

/// One pseudo-observation sqrt(n d_c) e_c with target zero on coordinate
/// c = cursor, so that on average diag(d) is added to the weighted correlation.
void regularization_update(InverseCorrelation<Complex>& phi, Eigen::VectorXcd& a,
                           const Eigen::VectorXd& weights, Index& cursor);

/// Diagonal load of the power correlation: lambda plus the energy that the
/// filters collect from each hop's forwarding noise, (1 - rho^2) |g|^2.
Eigen::VectorXd power_loading(const Eigen::MatrixXcd& filters,
                              const std::vector<SignatureImages>& signatures,
                              const SymbolContext& symbols, double lambda);

struct ChannelRlsState {
  InverseCorrelation<Complex> rh_inv;
  Eigen::VectorXcd cross;     // p_h
  Eigen::VectorXcd estimate;  // h_hat
  double forgetting = 0.998;

  static ChannelRlsState create(Index dim, double forgetting, double delta,
                                const Eigen::VectorXcd& initial);
};

/// xi = b - W^H[i-1] r; k from Phi[i-1]; W[i] = W[i-1] + k xi^H.
Eigen::VectorXcd receiver_update(ReceiverRlsState& state, const Eigen::VectorXcd& r,
                                 const Eigen::VectorXcd& desired);

/// Regressors u_k = B^H H_hat^H C^H w_k, one column per user, with the
/// neighbouring symbols' spill-over added through the spilled images.
Eigen::MatrixXcd power_regressors(const Eigen::MatrixXcd& filters,
                                  const std::vector<SignatureImages>& signatures,
                                  const SymbolContext& symbols);

/// K successive rank-one updates sharing Phi_a (the forgetting factor is applied
/// once per symbol), the regularization step, then the sphere projection.
/// Returns the regressors used.
Eigen::MatrixXcd power_update(PowerRlsState& state, const Eigen::MatrixXcd& filters,
                              const std::vector<SignatureImages>& signatures,
                              const SymbolContext& symbols);

/// R_h^-1 absorbs the regressor row by row (forgetting applied once), then
/// p_h = alpha p_h + V^H r and h_hat = R_h^-1 p_h.
void channel_update(ChannelRlsState& state, const Eigen::VectorXcd& r,
                    const Eigen::MatrixXcd& regressor);

/// Joint receiver / power / channel recursion under the global power budget.
class GpcEstimator {
 public:
  GpcEstimator(std::vector<SpreadingBasis> bases, int hops, double forgetting, double delta,
               double budget, const Eigen::VectorXd& initial_amps,
               const Eigen::VectorXcd& initial_channels, bool adapt_power);

  /// A priori receiver outputs W^H[i-1] r.
  Eigen::VectorXcd outputs(const Eigen::VectorXcd& r) const;

  /// One symbol: channel -> receiver -> power.
  void step(const Eigen::VectorXcd& r, const SymbolContext& symbols);

  std::vector<Eigen::VectorXd> amplitudes() const;
  std::vector<Eigen::MatrixXcd> signature_estimates() const;
  Eigen::VectorXcd user_channels(int user) const;
  void set_power_adaptation(bool on) { adapt_power_ = on; }
  void set_power_regularization(double lambda) { power_.regularization = lambda; }

  const ReceiverRlsState& receiver() const { return receiver_; }
  const PowerRlsState& power() const { return power_; }
  const ChannelRlsState& channel() const { return channel_; }

 private:
  std::vector<SpreadingBasis> bases_;
  int hops_;
  ReceiverRlsState receiver_;
  PowerRlsState power_;
  ChannelRlsState channel_;
  bool adapt_power_;
};

}  // namespace coopcdma
