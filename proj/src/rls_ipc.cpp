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

#include "coopcdma/rls_ipc.hpp"

#include "coopcdma/mmse_designer.hpp"

#include <cmath>

namespace coopcdma {

Complex user_receiver_update(UserRlsState& state, const Eigen::VectorXcd& gain,
                             const Eigen::VectorXcd& r, Complex desired) {
  const Complex xi = desired - state.filter.dot(r);
  state.filter += gain * std::conj(xi);
  if (!state.filter.allFinite()) throw NumericalError("user receiver update: non-finite filter");
  return xi;
}

Eigen::VectorXcd user_power_update(UserRlsState& state, const SignatureImages& signature,
                                   Complex current, Complex previous, Complex next,
                                   const Eigen::VectorXd& reliability) {
  Eigen::VectorXcd u = std::conj(current) * (signature.current.adjoint() * state.filter);
  if (previous != Complex(0.0))
    u += std::conj(previous) * (signature.previous.adjoint() * state.filter);
  if (next != Complex(0.0)) u += std::conj(next) * (signature.next.adjoint() * state.filter);
  Eigen::VectorXcd a = state.amplitudes.cast<Complex>();
  const Complex e = current - u.dot(a);
  const Eigen::VectorXcd gain = state.phi_a.update(u, state.forgetting);
  a += gain * e;
  SymbolContext own{Eigen::VectorXcd::Constant(1, current), Eigen::VectorXcd::Constant(1, previous),
                    Eigen::VectorXcd::Constant(1, next), Eigen::MatrixXd()};
  if (reliability.size() > 0) own.reliability = reliability.transpose();
  regularization_update(state.phi_a, a,
                        power_loading(state.filter, {signature}, own, state.regularization),
                        state.cursor);
  state.amplitudes = project_to_sphere(a, state.budget);
  state.max_violation =
      std::max(state.max_violation, std::abs(state.amplitudes.squaredNorm() - state.budget));
  return u;
}

void user_channel_update(UserRlsState& state, const Eigen::VectorXcd& r,
                         const Eigen::MatrixXcd& regressor) {
  channel_update(state.channel, r, regressor);
}

IpcEstimator::IpcEstimator(std::vector<SpreadingBasis> bases, int hops, double forgetting,
                           double delta, const Eigen::VectorXd& budgets,
                           const std::vector<Eigen::VectorXd>& initial_amps,
                           const std::vector<Eigen::VectorXcd>& initial_channels,
                           bool adapt_power)
    : bases_(std::move(bases)), hops_(hops), adapt_power_(adapt_power) {
  const Index m = bases_.front().conv.rows(), taps = bases_.front().conv.cols();
  const Index dim = m * hops;
  shared_ = SharedCorrelation{InverseCorrelation<Complex>(dim, delta), forgetting};
  for (std::size_t k = 0; k < bases_.size(); ++k) {
    UserRlsState u;
    u.phi_a = InverseCorrelation<Complex>(hops, delta);
    u.amplitudes = initial_amps[k];
    u.budget = budgets(Index(k));
    u.forgetting = forgetting;
    u.channel = ChannelRlsState::create(hops * taps, forgetting, delta, initial_channels[k]);
    const Eigen::VectorXcd w =
        signature_from_channels(bases_[k], u.channel.estimate, hops) * u.amplitudes.cast<Complex>();
    const double n = w.norm();
    u.filter = n > 0.0 ? Eigen::VectorXcd(w / n) : Eigen::VectorXcd::Zero(dim);
    users_.push_back(std::move(u));
  }
}

Eigen::VectorXcd IpcEstimator::outputs(const Eigen::VectorXcd& r) const {
  Eigen::VectorXcd y(Index(users_.size()));
  for (std::size_t k = 0; k < users_.size(); ++k) y(Index(k)) = users_[k].filter.dot(r);
  return y;
}

void IpcEstimator::step(const Eigen::VectorXcd& r, const SymbolContext& symbols) {
  const Eigen::VectorXcd gain = shared_.advance(r);
  for (std::size_t k = 0; k < users_.size(); ++k) {
    UserRlsState& u = users_[k];
    const Index kk = Index(k);
    user_channel_update(u, r,
                        user_channel_regressor(bases_[k], symbols.current(kk),
                                               symbols.previous(kk), symbols.next(kk),
                                               u.amplitudes));
    user_receiver_update(u, gain, r, symbols.current(kk));
    if (adapt_power_)
      user_power_update(u, signature_images(bases_[k], u.channel.estimate, hops_),
                        symbols.current(kk), symbols.previous(kk), symbols.next(kk),
                        symbols.reliability.size() == 0
                            ? Eigen::VectorXd()
                            : Eigen::VectorXd(symbols.reliability.row(kk).transpose()));
  }
}

std::vector<Eigen::VectorXd> IpcEstimator::amplitudes() const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& u : users_) out.push_back(u.amplitudes);
  return out;
}

Eigen::MatrixXcd IpcEstimator::filters() const {
  Eigen::MatrixXcd w(users_.front().filter.size(), Index(users_.size()));
  for (std::size_t k = 0; k < users_.size(); ++k) w.col(Index(k)) = users_[k].filter;
  return w;
}

Eigen::MatrixXcd IpcEstimator::signature_estimate(int user) const {
  return signature_from_channels(bases_[std::size_t(user)],
                                 users_[std::size_t(user)].channel.estimate, hops_);
}

}  // namespace coopcdma
