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

#include "coopcdma/signal_model.hpp"

#include <cmath>
#include <string>

namespace coopcdma {

SpreadingCode SpreadingCode::random(int length, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  SpreadingCode c;
  c.chips.resize(length);
  const double v = 1.0 / std::sqrt(double(length));
  for (int i = 0; i < length; ++i) c.chips(i) = coin(rng) ? v : -v;
  return c;
}

SpreadingCode SpreadingCode::from_signs(const std::vector<int>& signs) {
  SpreadingCode c;
  c.chips.resize(Index(signs.size()));
  const double v = 1.0 / std::sqrt(double(signs.size()));
  for (std::size_t i = 0; i < signs.size(); ++i) c.chips(Index(i)) = signs[i] >= 0 ? v : -v;
  return c;
}

Eigen::VectorXcd SymbolFrame::stacked() const {
  Eigen::VectorXcd s(hops());
  s(0) = direct;
  s.tail(relayed.size()) = relayed;
  return s;
}

SymbolFrame SymbolFrame::zero(int relays) {
  return SymbolFrame{Complex(0.0, 0.0), Eigen::VectorXcd::Zero(relays)};
}

SymbolFrame SymbolFrame::repeated(Complex b, int relays) {
  return SymbolFrame{b, Eigen::VectorXcd::Constant(relays, b)};
}

Eigen::MatrixXd build_convolution_matrix(const SpreadingCode& code, int taps) {
  return convolution_matrix(code.chips, taps);
}

Eigen::MatrixXd build_block_signature(const Eigen::MatrixXd& conv, int relays) {
  return block_signature(conv, relays);
}

Eigen::MatrixXcd build_channel_matrix(const std::vector<ChannelVector>& hops) {
  if (hops.empty()) throw std::invalid_argument("build_channel_matrix: no hops");
  const Index taps = hops.front().size();
  const Index n = Index(hops.size());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n * taps, n);
  for (Index j = 0; j < n; ++j) {
    if (hops[std::size_t(j)].size() != taps)
      throw std::invalid_argument("build_channel_matrix: hop " + std::to_string(j) +
                                  " has the wrong tap count");
    h.block(j * taps, j, taps, 1) = hops[std::size_t(j)];
  }
  return h;
}

Eigen::MatrixXcd stacked_signature(const Eigen::MatrixXd& conv,
                                   const std::vector<ChannelVector>& hops) {
  const Index m = conv.rows(), n = Index(hops.size());
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(m * n, n);
  for (Index j = 0; j < n; ++j) x.block(j * m, j, m, 1) = conv * hops[std::size_t(j)];
  return x;
}

ChannelVector generate_multipath_channel(int taps, Rng& rng) {
  if (taps < 1) throw std::invalid_argument("generate_multipath_channel: taps must be >= 1");
  ChannelVector h = complex_gaussian_vector(rng, taps);
  double norm = h.norm();
  while (norm == 0.0) {
    h = complex_gaussian_vector(rng, taps);
    norm = h.norm();
  }
  return h / norm;
}

Complex modulate_qpsk(int bit_i, int bit_q) {
  constexpr double s = 0.70710678118654752440;
  return {bit_i ? -s : s, bit_q ? -s : s};
}

std::array<int, 2> demodulate_qpsk(Complex soft) {
  return {soft.real() < 0.0 ? 1 : 0, soft.imag() < 0.0 ? 1 : 0};
}

namespace {

void check_user_shapes(const SystemDims& dims, std::size_t k, const Eigen::MatrixXd& sig,
                       const Eigen::MatrixXcd& ch, const SymbolFrame& sym,
                       const AmplitudeVector& a) {
  const Index hops = dims.hops();
  const bool ok = sig.rows() == dims.stacked() && sig.cols() == hops * dims.taps &&
                  ch.rows() == hops * dims.taps && ch.cols() == hops && sym.hops() == hops &&
                  a.size() == hops;
  if (!ok)
    throw std::invalid_argument("received frame: shape mismatch for user " + std::to_string(k));
}

}  // namespace

ReceivedFrame assemble_received_frame(const SystemDims& dims,
                                      const std::vector<Eigen::MatrixXd>& signatures,
                                      const std::vector<Eigen::MatrixXcd>& channels,
                                      const std::vector<SymbolFrame>& symbols,
                                      const std::vector<AmplitudeVector>& amps,
                                      const Eigen::VectorXcd& isi, double noise_variance,
                                      Rng& rng) {
  const std::size_t k_users = std::size_t(dims.users);
  if (signatures.size() != k_users || channels.size() != k_users || symbols.size() != k_users ||
      amps.size() != k_users)
    throw std::invalid_argument("received frame: expected one entry per user");
  if (isi.size() != dims.stacked())
    throw std::invalid_argument("received frame: isi vector has the wrong length");
  if (noise_variance < 0.0) throw std::invalid_argument("received frame: negative noise variance");

  ReceivedFrame f;
  f.noise_variance = noise_variance;
  f.signal = Eigen::VectorXcd::Zero(dims.stacked());
  for (std::size_t k = 0; k < k_users; ++k) {
    check_user_shapes(dims, k, signatures[k], channels[k], symbols[k], amps[k]);
    f.signal.noalias() += signatures[k].cast<Complex>() *
                          (channels[k] * (symbols[k].diagonal() * amps[k].cast<Complex>()));
  }
  f.isi = isi;
  f.noise = noise_variance > 0.0 ? complex_gaussian_vector(rng, dims.stacked(), noise_variance)
                                 : Eigen::VectorXcd::Zero(dims.stacked());
  f.total = f.signal + f.isi + f.noise;
  return f;
}

Eigen::VectorXcd generate_isi(const SystemDims& dims, const std::vector<SymbolFrame>& previous,
                              const std::vector<SymbolFrame>& next,
                              const std::vector<Eigen::MatrixXcd>& channels,
                              const std::vector<Eigen::MatrixXd>& signatures,
                              const std::vector<AmplitudeVector>& amps) {
  Eigen::VectorXcd eta = Eigen::VectorXcd::Zero(dims.stacked());
  if (dims.taps == 1) return eta;
  for (std::size_t k = 0; k < std::size_t(dims.users); ++k) {
    check_user_shapes(dims, k, signatures[k], channels[k], previous[k], amps[k]);
    const Eigen::MatrixXcd xa =
        signatures[k].cast<Complex>() * channels[k] * amps[k].cast<Complex>().asDiagonal();
    const Eigen::VectorXcd prev = xa * previous[k].stacked();
    const Eigen::VectorXcd nxt = xa * next[k].stacked();
    eta += spill(prev, dims.window(), dims.chips, Spill::Previous);
    eta += spill(nxt, dims.window(), dims.chips, Spill::Next);
  }
  return eta;
}

}  // namespace coopcdma
