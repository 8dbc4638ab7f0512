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

#include "coopcdma/rng.hpp"
#include "coopcdma/types.hpp"

#include <array>
#include <vector>

namespace coopcdma {

// ---------------------------------------------------------------------------
// Dense builders. These are templated on the scalar of the input so they work
// for real codes as well as complex channel-weighted signatures.
// ---------------------------------------------------------------------------

/// M x L matrix whose column c is the code shifted down by c chips.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> convolution_matrix(
    const Eigen::MatrixBase<Derived>& code, Index taps) {
  if (taps < 1) throw std::invalid_argument("convolution_matrix: taps must be >= 1");
  const Index n = code.size();
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n + taps - 1,
                                                                                  taps);
  for (Index c = 0; c < taps; ++c) d.col(c).segment(c, n) = code;
  return d;
}

/// Block-diagonal replication of `block` (relays + 1) times.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> block_signature(
    const Eigen::MatrixBase<Derived>& block, Index relays) {
  if (relays < 0) throw std::invalid_argument("block_signature: relays must be >= 0");
  const Index rows = block.rows(), cols = block.cols(), copies = relays + 1;
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows * copies,
                                                                                  cols * copies);
  for (Index j = 0; j < copies; ++j) out.block(j * rows, j * cols, rows, cols) = block;
  return out;
}

/// Direction of an intersymbol spill-over into the current chip window.
enum class Spill { Previous, Next };

/// Shifts every `window`-row block of `x` by `chips` rows, zero filling.
///
/// Previous: row r takes row r + chips (tail of the preceding symbol).
/// Next:     row r takes row r - chips (head of the following symbol).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> spill(
    const Eigen::MatrixBase<Derived>& x, Index window, Index chips, Spill dir) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat out = Mat::Zero(x.rows(), x.cols());
  const Index overlap = window - chips;
  if (overlap <= 0) return out;
  for (Index b = 0; b < x.rows() / window; ++b) {
    const Index base = b * window;
    if (dir == Spill::Previous)
      out.middleRows(base, overlap) = x.middleRows(base + chips, overlap);
    else
      out.middleRows(base + chips, overlap) = x.middleRows(base, overlap);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Unit-norm binary signature, entries +-1/sqrt(N).
struct SpreadingCode {
  Eigen::VectorXd chips;

  static SpreadingCode random(int length, Rng& rng);
  static SpreadingCode from_signs(const std::vector<int>& signs);
  Index size() const { return chips.size(); }
};

/// The L x 1 gains of one directed link.
using ChannelVector = Eigen::VectorXcd;

/// Per-link amplitudes of one user, ordered [direct, relay 1, ..., relay n_r].
using AmplitudeVector = Eigen::VectorXd;

/// Symbols of one user in one interval: the source symbol and what each relay forwards.
struct SymbolFrame {
  Complex direct{0.0, 0.0};
  Eigen::VectorXcd relayed;

  Index hops() const { return relayed.size() + 1; }
  Eigen::VectorXcd stacked() const;
  Eigen::MatrixXcd diagonal() const { return stacked().asDiagonal(); }
  static SymbolFrame zero(int relays);
  static SymbolFrame repeated(Complex b, int relays);
};

/// Destination observation for one symbol interval, with its parts kept apart.
struct ReceivedFrame {
  Eigen::VectorXcd total;
  Eigen::VectorXcd signal;
  Eigen::VectorXcd isi;
  Eigen::VectorXcd noise;
  double noise_variance = 0.0;
};

/// Ground truth of one scenario: codes and all link channels of every user.
struct UserLinks {
  SpreadingCode code;
  std::vector<ChannelVector> to_destination;  // [source->dest, relay j->dest ...]
  std::vector<ChannelVector> to_relay;        // [source->relay j ...]
};

struct LinkEnsemble {
  SystemDims dims;
  std::vector<UserLinks> users;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Eigen::MatrixXd build_convolution_matrix(const SpreadingCode& code, int taps);
Eigen::MatrixXd build_block_signature(const Eigen::MatrixXd& conv, int relays);

/// (n_r+1)L x (n_r+1) matrix with hop j's taps in rows jL..(j+1)L-1 of column j.
Eigen::MatrixXcd build_channel_matrix(const std::vector<ChannelVector>& hops);

/// C_k H_k computed block-wise: column j is D_k h_j placed in chip block j.
Eigen::MatrixXcd stacked_signature(const Eigen::MatrixXd& conv,
                                   const std::vector<ChannelVector>& hops);

/// I.i.d. circular Gaussian taps rescaled to unit norm.
ChannelVector generate_multipath_channel(int taps, Rng& rng);

/// Gray-mapped unit-energy QPSK: bit 0 -> +, bit 1 -> -, on I and Q.
Complex modulate_qpsk(int bit_i, int bit_q);
std::array<int, 2> demodulate_qpsk(Complex soft);

/// r = sum_k C_k H_k B_k a_k + isi + n, with n drawn from `rng`.
///
/// Throws std::invalid_argument naming the first user whose shapes disagree with `dims`.
ReceivedFrame assemble_received_frame(const SystemDims& dims,
                                      const std::vector<Eigen::MatrixXd>& signatures,
                                      const std::vector<Eigen::MatrixXcd>& channels,
                                      const std::vector<SymbolFrame>& symbols,
                                      const std::vector<AmplitudeVector>& amps,
                                      const Eigen::VectorXcd& isi, double noise_variance, Rng& rng);

/// Adjacent-symbol spill-over into the current window (zeros at packet edges are
/// expressed by zero SymbolFrames).
Eigen::VectorXcd generate_isi(const SystemDims& dims, const std::vector<SymbolFrame>& previous,
                              const std::vector<SymbolFrame>& next,
                              const std::vector<Eigen::MatrixXcd>& channels,
                              const std::vector<Eigen::MatrixXd>& signatures,
                              const std::vector<AmplitudeVector>& amps);

}  // namespace coopcdma
