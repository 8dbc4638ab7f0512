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

#include "coopcdma/rls_gpc.hpp"

#include "coopcdma/mmse_designer.hpp"

#include <cmath>

namespace coopcdma {

SpreadingBasis::SpreadingBasis(const SpreadingCode& code, int taps)
    : conv(build_convolution_matrix(code, taps)) {
  const Index window = conv.rows();
  const Index chips = code.size();
  previous = spill(conv, window, chips, Spill::Previous);
  next = spill(conv, window, chips, Spill::Next);
}

Eigen::MatrixXcd user_channel_regressor(const SpreadingBasis& basis, Complex current,
                                        Complex previous, Complex next,
                                        const Eigen::VectorXd& amps) {
  const Index m = basis.conv.rows(), taps = basis.conv.cols(), hops = amps.size();
  const Eigen::MatrixXcd block = current * basis.conv.cast<Complex>() +
                                 previous * basis.previous.cast<Complex>() +
                                 next * basis.next.cast<Complex>();
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(m * hops, taps * hops);
  for (Index j = 0; j < hops; ++j) v.block(j * m, j * taps, m, taps) = amps(j) * block;
  return v;
}

Eigen::MatrixXcd channel_regressor(const std::vector<SpreadingBasis>& bases,
                                   const SymbolContext& symbols,
                                   const std::vector<Eigen::VectorXd>& amps) {
  const Index hops = amps.front().size();
  const Index m = bases.front().conv.rows(), taps = bases.front().conv.cols();
  Eigen::MatrixXcd v(m * hops, Index(bases.size()) * hops * taps);
  for (std::size_t k = 0; k < bases.size(); ++k) {
    const Index kk = Index(k);
    v.middleCols(kk * hops * taps, hops * taps) =
        user_channel_regressor(bases[k], symbols.current(kk), symbols.previous(kk),
                               symbols.next(kk), amps[k]);
  }
  return v;
}

Eigen::MatrixXcd signature_from_channels(const SpreadingBasis& basis,
                                         const Eigen::VectorXcd& taps, int hops) {
  const Index m = basis.conv.rows(), l = basis.conv.cols();
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(m * hops, hops);
  for (Index j = 0; j < hops; ++j)
    x.block(j * m, j, m, 1) = basis.conv.cast<Complex>() * taps.segment(j * l, l);
  return x;
}

SignatureImages signature_images(const SpreadingBasis& basis, const Eigen::VectorXcd& taps,
                                 int hops) {
  const Index m = basis.conv.rows(), l = basis.conv.cols();
  SignatureImages out{Eigen::MatrixXcd::Zero(m * hops, hops), Eigen::MatrixXcd::Zero(m * hops, hops),
                      Eigen::MatrixXcd::Zero(m * hops, hops)};
  for (Index j = 0; j < hops; ++j) {
    const auto h = taps.segment(j * l, l);
    out.current.block(j * m, j, m, 1) = basis.conv.cast<Complex>() * h;
    out.previous.block(j * m, j, m, 1) = basis.previous.cast<Complex>() * h;
    out.next.block(j * m, j, m, 1) = basis.next.cast<Complex>() * h;
  }
  return out;
}

ChannelRlsState ChannelRlsState::create(Index dim, double forgetting, double delta,
                                        const Eigen::VectorXcd& initial) {
  ChannelRlsState s{InverseCorrelation<Complex>(dim, delta), Eigen::VectorXcd::Zero(dim), initial,
                    forgetting};
  return s;
}

Eigen::VectorXcd receiver_update(ReceiverRlsState& state, const Eigen::VectorXcd& r,
                                 const Eigen::VectorXcd& desired) {
  const Eigen::VectorXcd xi = desired - state.filters.adjoint() * r;
  const Eigen::VectorXcd gain = state.phi.update(r, state.forgetting);
  state.filters.noalias() += gain * xi.adjoint();
  if (!state.filters.allFinite()) throw NumericalError("receiver update: non-finite filter");
  return xi;
}

Eigen::MatrixXcd power_regressors(const Eigen::MatrixXcd& filters,
                                  const std::vector<SignatureImages>& signatures,
                                  const SymbolContext& symbols) {
  const Index hops = signatures.front().current.cols();
  const Index users = filters.cols();
  Eigen::MatrixXcd u(Index(signatures.size()) * hops, users);
  for (std::size_t l = 0; l < signatures.size(); ++l) {
    const Index ll = Index(l);
    const SignatureImages& x = signatures[l];
    u.middleRows(ll * hops, hops) = std::conj(symbols.current(ll)) * (x.current.adjoint() * filters);
    if (symbols.previous(ll) != Complex(0.0))
      u.middleRows(ll * hops, hops) +=
          std::conj(symbols.previous(ll)) * (x.previous.adjoint() * filters);
    if (symbols.next(ll) != Complex(0.0))
      u.middleRows(ll * hops, hops) += std::conj(symbols.next(ll)) * (x.next.adjoint() * filters);
  }
  return u;
}

void regularization_update(InverseCorrelation<Complex>& phi, Eigen::VectorXcd& a,
                           const Eigen::VectorXd& weights, Index& cursor) {
  const Index n = a.size();
  const Index c = cursor;
  cursor = (cursor + 1) % n;
  if (!(weights(c) > 0.0)) return;
  const double s = std::sqrt(double(n) * weights(c));
  const Eigen::VectorXcd gain = phi.update(s * Eigen::VectorXcd::Unit(n, c), 1.0);
  a += gain * (-s * a(c));
}

Eigen::VectorXd power_loading(const Eigen::MatrixXcd& filters,
                              const std::vector<SignatureImages>& signatures,
                              const SymbolContext& symbols, double lambda) {
  const Index hops = signatures.front().current.cols();
  Eigen::VectorXd d = Eigen::VectorXd::Constant(Index(signatures.size()) * hops, lambda);
  if (symbols.reliability.size() == 0) return d;
  for (std::size_t l = 0; l < signatures.size(); ++l) {
    const SignatureImages& x = signatures[l];
    const Eigen::VectorXd energy = (x.current.adjoint() * filters).rowwise().squaredNorm() +
                                   (x.previous.adjoint() * filters).rowwise().squaredNorm() +
                                   (x.next.adjoint() * filters).rowwise().squaredNorm();
    for (Index j = 0; j < hops; ++j) {
      const double rho = symbols.hop_reliability(Index(l), j);
      d(Index(l) * hops + j) += std::max(0.0, 1.0 - rho * rho) * energy(j);
    }
  }
  return d;
}

Eigen::MatrixXcd power_update(PowerRlsState& state, const Eigen::MatrixXcd& filters,
                              const std::vector<SignatureImages>& signatures,
                              const SymbolContext& symbols) {
  const Eigen::MatrixXcd u = power_regressors(filters, signatures, symbols);
  Eigen::VectorXcd a = state.amplitudes.cast<Complex>();
  for (Index k = 0; k < u.cols(); ++k) {
    const double forgetting = k == 0 ? state.forgetting : 1.0;
    // Model output for user k is u_k^H a; the a priori error drives the update.
    const Complex e = symbols.current(k) - u.col(k).dot(a);
    const Eigen::VectorXcd gain = state.phi.update(u.col(k), forgetting);
    a += gain * e;
  }
  regularization_update(state.phi, a,
                        power_loading(filters, signatures, symbols, state.regularization),
                        state.cursor);
  state.amplitudes = project_to_sphere(a, state.budget);
  state.max_violation =
      std::max(state.max_violation, std::abs(state.amplitudes.squaredNorm() - state.budget));
  return u;
}

void channel_update(ChannelRlsState& state, const Eigen::VectorXcd& r,
                    const Eigen::MatrixXcd& regressor) {
  for (Index m = 0; m < regressor.rows(); ++m) {
    state.rh_inv.update(regressor.row(m).adjoint(), m == 0 ? state.forgetting : 1.0, false);
  }
  state.rh_inv.symmetrize();
  state.cross = state.forgetting * state.cross + regressor.adjoint() * r;
  state.estimate = state.rh_inv.matrix() * state.cross;
  if (!state.estimate.allFinite()) throw NumericalError("channel update: non-finite estimate");
}

GpcEstimator::GpcEstimator(std::vector<SpreadingBasis> bases, int hops, double forgetting,
                           double delta, double budget, const Eigen::VectorXd& initial_amps,
                           const Eigen::VectorXcd& initial_channels, bool adapt_power)
    : bases_(std::move(bases)), hops_(hops), adapt_power_(adapt_power) {
  const Index users = Index(bases_.size());
  const Index m = bases_.front().conv.rows(), taps = bases_.front().conv.cols();
  const Index dim = m * hops;

  channel_ = ChannelRlsState::create(users * hops * taps, forgetting, delta, initial_channels);
  power_ = PowerRlsState{InverseCorrelation<Complex>(users * hops, delta), initial_amps, budget,
                         forgetting, 0.0};

  receiver_.phi = InverseCorrelation<Complex>(dim, delta);
  receiver_.forgetting = forgetting;
  receiver_.filters.resize(dim, users);
  const auto sig = signature_estimates();
  const auto amps = amplitudes();
  for (Index k = 0; k < users; ++k) {
    Eigen::VectorXcd w = sig[std::size_t(k)] * amps[std::size_t(k)].cast<Complex>();
    const double n = w.norm();
    receiver_.filters.col(k) = n > 0.0 ? Eigen::VectorXcd(w / n) : Eigen::VectorXcd::Zero(dim);
  }
}

Eigen::VectorXcd GpcEstimator::outputs(const Eigen::VectorXcd& r) const {
  return receiver_.filters.adjoint() * r;
}

void GpcEstimator::step(const Eigen::VectorXcd& r, const SymbolContext& symbols) {
  channel_update(channel_, r, channel_regressor(bases_, symbols, amplitudes()));
  receiver_update(receiver_, r, symbols.current);
  if (adapt_power_) {
    std::vector<SignatureImages> images;
    for (std::size_t k = 0; k < bases_.size(); ++k)
      images.push_back(signature_images(bases_[k], user_channels(int(k)), hops_));
    power_update(power_, receiver_.filters, images, symbols);
  }
}

std::vector<Eigen::VectorXd> GpcEstimator::amplitudes() const {
  return unstack_amplitudes(power_.amplitudes, hops_);
}

Eigen::VectorXcd GpcEstimator::user_channels(int user) const {
  const Index len = Index(hops_) * bases_.front().conv.cols();
  return channel_.estimate.segment(Index(user) * len, len);
}

std::vector<Eigen::MatrixXcd> GpcEstimator::signature_estimates() const {
  std::vector<Eigen::MatrixXcd> out;
  for (std::size_t k = 0; k < bases_.size(); ++k)
    out.push_back(signature_from_channels(bases_[k], user_channels(int(k)), hops_));
  return out;
}

}  // namespace coopcdma
