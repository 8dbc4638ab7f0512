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

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace coopcdma {

using Complex = std::complex<double>;
using Eigen::Index;

/// Raised when a recursion or solve produces non-finite or degenerate values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integer dimensions of one cooperative uplink.
///
/// The chip window (chips + taps - 1) is always derived, never stored.
struct SystemDims {
  int users = 4;        // K
  int chips = 16;       // N, processing gain
  int taps = 3;         // L, multipath taps per link
  int relays = 2;       // n_r
  int packet_len = 1500;  // P, symbols per packet

  int window() const { return chips + taps - 1; }
  int hops() const { return relays + 1; }
  Index stacked() const { return Index(hops()) * window(); }

  void validate() const {
    if (users < 1) throw std::invalid_argument("users must be >= 1");
    if (chips < 1) throw std::invalid_argument("chips must be >= 1");
    if (taps < 1) throw std::invalid_argument("taps must be >= 1");
    if (relays < 0) throw std::invalid_argument("relays must be >= 0");
    if (packet_len < 1) throw std::invalid_argument("packet_len must be >= 1");
    if (taps - 1 > chips)
      throw std::invalid_argument("taps - 1 must not exceed chips (single-symbol ISI memory)");
  }

  bool operator==(const SystemDims&) const = default;
};

}  // namespace coopcdma
