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

#include <cstdint>
#include <random>

namespace coopcdma {

using Rng = std::mt19937_64;

/// Independent random streams of one Monte Carlo trial.
///
/// Every quantity gets its own stream so that removing the relays (or
/// changing the scheme) never shifts the draws of the direct link.
enum class Stream : std::uint64_t {
  Codes = 1,
  DirectChannel,
  RelayDestChannel,
  SourceRelayChannel,
  Shadowing,
  Symbols,
  DestinationNoise,
  RelayNoise,
  EstimatorInit,
  Scratch,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: (master, trial, stream, sub) -> 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, Stream stream,
                                 std::uint64_t sub = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ trial);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  return splitmix64(s ^ sub);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t trial, Stream stream,
                       std::uint64_t sub = 0) {
  return Rng(derive_seed(master, trial, stream, sub));
}

/// Circular complex Gaussian with the given total variance per complex entry.
inline Complex complex_gaussian(Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline Eigen::VectorXcd complex_gaussian_vector(Rng& rng, Index size, double variance = 1.0) {
  Eigen::VectorXcd v(size);
  for (Index i = 0; i < size; ++i) v(i) = complex_gaussian(rng, variance);
  return v;
}

}  // namespace coopcdma
