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

#include "coopcdma/coop_protocol.hpp"

#include <cmath>
#include <string>

namespace coopcdma {

RelaySchedule schedule(int symbol, int relays) {
  if (symbol < 0) throw std::invalid_argument("schedule: symbol index must be >= 0");
  if (relays < 0) throw std::invalid_argument("schedule: relays must be >= 0");
  RelaySchedule s;
  s.symbol = symbol;
  s.direct_slot = relays * symbol + 1;
  for (int j = 1; j <= relays; ++j) s.relay_slots.push_back(relays * symbol + j + 1);
  return s;
}

Complex relay_forward(const Eigen::VectorXcd& r_sr, const RelayState& state, int user) {
  if (user < 0 || user >= state.filters.cols())
    throw std::invalid_argument("relay_forward: user index out of range");
  const auto w = state.filters.col(user);
  const double g = state.gains(user);
  if (w.squaredNorm() == 0.0 || !std::isfinite(g))
    throw NumericalError("relay_forward: degenerate filter for user " + std::to_string(user));
  return g * w.dot(r_sr);
}

DesignScenario relay_design_scenario(const LinkEnsemble& links, int relay,
                                     const Eigen::VectorXd& source_amps, double noise_variance) {
  const SystemDims& d = links.dims;
  if (relay < 0 || relay >= d.relays)
    throw std::invalid_argument("relay_design_scenario: relay index out of range");
  DesignScenario scn;
  scn.noise_variance = noise_variance;
  scn.budgets = source_amps.cwiseAbs2();
  for (const UserLinks& u : links.users) {
    const Eigen::MatrixXd conv = build_convolution_matrix(u.code, d.taps);
    DesignUser du;
    du.signature = stacked_signature(conv, {u.to_relay[std::size_t(relay)]});
    du.spill_previous = spill(du.signature, d.window(), d.chips, Spill::Previous);
    du.spill_next = spill(du.signature, d.window(), d.chips, Spill::Next);
    du.relay_correlation = Eigen::VectorXd::Ones(1);
    scn.users.push_back(std::move(du));
  }
  return scn;
}

ExactRelay exact_relay(const DesignScenario& relay_scn, const Eigen::VectorXd& source_amps) {
  std::vector<Eigen::VectorXd> amps;
  for (Index k = 0; k < source_amps.size(); ++k) amps.push_back(Eigen::VectorXd::Constant(1, source_amps(k)));
  const EnsembleStatistics s = build_statistics(relay_scn, amps);
  ExactRelay out;
  out.state.filters = receiver_global(s);
  out.state.gains.resize(source_amps.size());
  out.correlation.resize(source_amps.size());
  for (Index k = 0; k < source_amps.size(); ++k) {
    // E|w^H r|^2 = w^H R w = p^H R^-1 p = rho^2 for the MMSE filter.
    const double energy = std::real(out.state.filters.col(k).dot(s.cross.col(k)));
    if (!(energy > 0.0))
      throw NumericalError("exact relay: zero source->relay link for user " + std::to_string(k));
    out.correlation(k) = std::sqrt(energy);
    out.state.gains(k) = 1.0 / out.correlation(k);
  }
  return out;
}

Complex qpsk_slice(Complex soft) {
  constexpr double s = 0.70710678118654752440;
  return {soft.real() < 0.0 ? -s : s, soft.imag() < 0.0 ? -s : s};
}

AdaptiveRelay::AdaptiveRelay(Index window, int users, double forgetting, double delta)
    : phi_(window, delta),
      filters_(Eigen::MatrixXcd::Zero(window, users)),
      energy_(Eigen::VectorXd::Ones(users)),
      reliability_(Eigen::VectorXd::Ones(users)),
      forgetting_(forgetting) {}

Eigen::VectorXcd AdaptiveRelay::process(const Eigen::VectorXcd& r_sr,
                                        const Eigen::VectorXcd* pilots) {
  const Eigen::VectorXcd y = filters_.adjoint() * r_sr;
  energy_ = forgetting_ * energy_ + (1.0 - forgetting_) * y.cwiseAbs2();

  Eigen::VectorXcd forwarded(y.size()), desired(y.size());
  for (Index k = 0; k < y.size(); ++k) {
    if (pilots) {
      desired(k) = (*pilots)(k);
      forwarded(k) = desired(k);
    } else {
      desired(k) = qpsk_slice(y(k));
      forwarded(k) = y(k) / std::sqrt(energy_(k));
    }
    const double agreement = std::real(y(k) * std::conj(desired(k))) / std::sqrt(energy_(k));
    reliability_(k) = forgetting_ * reliability_(k) + (1.0 - forgetting_) * agreement;
  }
  forwarding_pilots_ = pilots != nullptr;
  const Eigen::VectorXcd gain = phi_.update(r_sr, forgetting_);
  filters_.noalias() += gain * (desired - y).adjoint();
  return forwarded;
}

Eigen::VectorXd AdaptiveRelay::forwarded_reliability() const {
  if (forwarding_pilots_) return Eigen::VectorXd::Ones(reliability_.size());
  return reliability_.cwiseMax(0.0).cwiseMin(1.0);
}

RelayState AdaptiveRelay::state() const {
  return RelayState{filters_, energy_.cwiseSqrt().cwiseInverse()};
}

}  // namespace coopcdma
