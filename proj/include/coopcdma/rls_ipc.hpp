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

#include "coopcdma/rls_gpc.hpp"

#include <vector>

namespace coopcdma {

/// Inverse correlation of the common observation r, shared by all users'
/// filter recursions. Advancing it once per symbol is the only cross-user step.
struct SharedCorrelation {
  InverseCorrelation<Complex> phi;
  double forgetting = 0.998;

  /// Updates Phi with r and returns the gain vector for this symbol.
  Eigen::VectorXcd advance(const Eigen::VectorXcd& r) { return phi.update(r, forgetting); }
};

/// Everything user k owns. Nothing here refers to another user.
struct UserRlsState {
  Eigen::VectorXcd filter;
  InverseCorrelation<Complex> phi_a;
  Eigen::VectorXd amplitudes;
  double budget = 1.0;  // P_{A,k}
  double forgetting = 0.998;
  double max_violation = 0.0;
  double regularization = 0.0;  // lambda
  Index cursor = 0;
  ChannelRlsState channel;
};

/// xi = b_k - w_k^H[i-1] r; w_k += k xi^*, with k from the shared Phi.
Complex user_receiver_update(UserRlsState& state, const Eigen::VectorXcd& gain,
                             const Eigen::VectorXcd& r, Complex desired);

/// u_k = B_k^H H_hat_k^H C_k^H w_k (plus neighbour spill-over), scalar-denominator
/// RLS step, regularization step, sphere projection. Returns the regressor used.
Eigen::VectorXcd user_power_update(UserRlsState& state, const SignatureImages& signature,
                                   Complex current, Complex previous, Complex next,
                                   const Eigen::VectorXd& reliability = Eigen::VectorXd());

/// Per-user channel recursion with regressor C_k B_k A_k.
void user_channel_update(UserRlsState& state, const Eigen::VectorXcd& r,
                         const Eigen::MatrixXcd& regressor);

/// Per-user receiver / power / channel recursions under individual budgets.
class IpcEstimator {
 public:
  IpcEstimator(std::vector<SpreadingBasis> bases, int hops, double forgetting, double delta,
               const Eigen::VectorXd& budgets, const std::vector<Eigen::VectorXd>& initial_amps,
               const std::vector<Eigen::VectorXcd>& initial_channels, bool adapt_power);

  Eigen::VectorXcd outputs(const Eigen::VectorXcd& r) const;

  /// One symbol: shared Phi barrier, then per user channel -> receiver -> power.
  void step(const Eigen::VectorXcd& r, const SymbolContext& symbols);

  std::vector<Eigen::VectorXd> amplitudes() const;
  Eigen::MatrixXcd filters() const;
  Eigen::MatrixXcd signature_estimate(int user) const;
  void set_power_adaptation(bool on) { adapt_power_ = on; }
  void set_power_regularization(double lambda) {
    for (auto& u : users_) u.regularization = lambda;
  }

  const SharedCorrelation& shared() const { return shared_; }
  const std::vector<UserRlsState>& users() const { return users_; }

 private:
  std::vector<SpreadingBasis> bases_;
  int hops_;
  SharedCorrelation shared_;
  std::vector<UserRlsState> users_;
  bool adapt_power_;
};

}  // namespace coopcdma
