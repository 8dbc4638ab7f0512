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

#include <cmath>

namespace coopcdma {

/// Exponentially weighted inverse correlation matrix maintained with the
/// matrix inversion lemma.
///
/// Tracks Phi = (alpha^n delta I + sum alpha^(n-l) x_l x_l^H)^-1 with
/// Phi(0) = delta^-1 I. Each update is O(dim^2).
template <typename Scalar>
class InverseCorrelation {
 public:
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  InverseCorrelation() = default;
  InverseCorrelation(Index dim, Real delta) : phi_(Matrix::Identity(dim, dim) / delta) {}

  /// Rank-one update with regressor x after discounting by `forgetting`.
  /// Returns the gain vector k = alpha^-1 Phi x / (1 + alpha^-1 x^H Phi x).
  /// Batched callers may defer the Hermitian clean-up to one symmetrize() call.
  template <typename Derived>
  Vector update(const Eigen::MatrixBase<Derived>& x, Real forgetting, bool symmetrize_now = true) {
    const Vector pi = phi_ * x;
    const Real denom = forgetting + std::real(x.dot(pi));
    if (!std::isfinite(denom) || denom <= Real(0))
      throw NumericalError("inverse correlation update: non-positive denominator");
    Vector gain = pi / denom;
    phi_.noalias() -= gain * pi.adjoint();
    if (forgetting != Real(1)) phi_ /= forgetting;
    if (symmetrize_now) symmetrize();
    return gain;
  }

  /// Phi <- (Phi + Phi^H) / 2, then a finiteness check.
  void symmetrize() {
    const Index n = phi_.rows();
    for (Index c = 0; c < n; ++c) {
      phi_(c, c) = Scalar(std::real(phi_(c, c)));
      for (Index r = c + 1; r < n; ++r) {
        const Scalar v = (phi_(r, c) + Eigen::numext::conj(phi_(c, r))) * Real(0.5);
        phi_(r, c) = v;
        phi_(c, r) = Eigen::numext::conj(v);
      }
    }
    if (!phi_.allFinite()) throw NumericalError("inverse correlation update: non-finite entries");
  }

  /// Discount only (used when the regressor is zero for a whole step).
  void discount(Real forgetting) { phi_ /= forgetting; }

  const Matrix& matrix() const { return phi_; }
  Index dim() const { return phi_.rows(); }

 private:
  Matrix phi_;
};

}  // namespace coopcdma
