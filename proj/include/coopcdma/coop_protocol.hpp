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
#include "coopcdma/rls.hpp"
#include "coopcdma/signal_model.hpp"

#include <vector>

namespace coopcdma {

/// Transmission slots used for symbol i: the source slot first, then one slot per relay.
struct RelaySchedule {
  int symbol = 0;
  int direct_slot = 0;
  std::vector<int> relay_slots;
};

RelaySchedule schedule(int symbol, int relays);

/// One relay's linear front end: a receive filter per user and the gain that
/// brings each soft estimate back to unit energy before re-spreading.
struct RelayState {
  Eigen::MatrixXcd filters;  // M x K
  Eigen::VectorXd gains;     // K
};

/// Filter-amplify-forward: gain * w_k^H r_sr.
/// Throws NumericalError for a zero filter or a non-finite gain.
Complex relay_forward(const Eigen::VectorXcd& r_sr, const RelayState& state, int user);

/// Single-hop design problem seen by relay `relay` (0-based) for the
/// source->relay links, each user transmitting with `source_amps(k)`.
DesignScenario relay_design_scenario(const LinkEnsemble& links, int relay,
                                     const Eigen::VectorXd& source_amps, double noise_variance);

/// Exact MMSE relay front end; also returns rho_k = E[b_tilde_k b_k^*].
struct ExactRelay {
  RelayState state;
  Eigen::VectorXd correlation;
};
ExactRelay exact_relay(const DesignScenario& relay_scn, const Eigen::VectorXd& source_amps);

/// Relay front end trained by RLS on the shared preamble.
///
/// While pilots are supplied the relay retransmits the known pilots; after
/// that it forwards its own energy-normalised soft estimates and adapts in
/// decision-directed mode.
class AdaptiveRelay {
 public:
  AdaptiveRelay(Index window, int users, double forgetting, double delta);

  /// Consumes one source->relay observation and returns what is forwarded for every user.
  Eigen::VectorXcd process(const Eigen::VectorXcd& r_sr, const Eigen::VectorXcd* pilots);

  RelayState state() const;

  /// Correlation of the values returned by the last process() call with the
  /// source symbols: one while pilots are forwarded, a running estimate after.
  Eigen::VectorXd forwarded_reliability() const;

 private:
  InverseCorrelation<Complex> phi_;
  Eigen::MatrixXcd filters_;
  Eigen::VectorXd energy_;
  Eigen::VectorXd reliability_;
  bool forwarding_pilots_ = true;
  double forgetting_;
};

/// Hard QPSK decision returned as a constellation point.
Complex qpsk_slice(Complex soft);

}  // namespace coopcdma
