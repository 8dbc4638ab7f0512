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

#include "coopcdma/mmse_designer.hpp"

#include <array>
#include <cmath>
#include <string>

namespace coopcdma {

namespace {

constexpr double kMinReciprocalCondition = 1e-13;

// Signature of the user (and its spill-overs) weighted by the link amplitudes.
struct Weighted {
  Eigen::MatrixXcd sig, prev, next;
};

Weighted weight(const DesignUser& u, const Eigen::VectorXd& a) {
  const Eigen::VectorXcd ac = a.cast<Complex>();
  return {u.signature * ac.asDiagonal(), u.spill_previous * ac.asDiagonal(),
          u.spill_next * ac.asDiagonal()};
}

void check_amps(const DesignScenario& scn, const std::vector<Eigen::VectorXd>& amps) {
  if (amps.size() != scn.users.size())
    throw std::invalid_argument("statistics: expected one amplitude vector per user");
  for (std::size_t k = 0; k < amps.size(); ++k)
    if (amps[k].size() != scn.users[k].hops())
      throw std::invalid_argument("statistics: amplitude size mismatch for user " +
                                  std::to_string(k));
}

}  // namespace

void MmseConfig::validate() const {
  if (lambda_global < 0.0 || lambda_individual < 0.0)
    throw std::invalid_argument("mmse config: lambda must be >= 0");
  if (max_iters < 1) throw std::invalid_argument("mmse config: max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("mmse config: tol must be > 0");
}

Eigen::MatrixXd DesignUser::symbol_correlation() const {
  Eigen::MatrixXd g = relay_correlation * relay_correlation.transpose();
  g.diagonal().setOnes();
  return g;
}

std::vector<Eigen::VectorXd> equal_power(const DesignScenario& scn) {
  std::vector<Eigen::VectorXd> amps;
  for (int k = 0; k < scn.num_users(); ++k)
    amps.push_back(
        Eigen::VectorXd::Constant(scn.hops(), std::sqrt(scn.budgets(k) / double(scn.hops()))));
  return amps;
}

Eigen::VectorXd stack_amplitudes(const std::vector<Eigen::VectorXd>& amps) {
  Index n = 0;
  for (const auto& a : amps) n += a.size();
  Eigen::VectorXd out(n);
  Index pos = 0;
  for (const auto& a : amps) {
    out.segment(pos, a.size()) = a;
    pos += a.size();
  }
  return out;
}

std::vector<Eigen::VectorXd> unstack_amplitudes(const Eigen::VectorXd& stacked, int hops) {
  std::vector<Eigen::VectorXd> out;
  for (Index pos = 0; pos < stacked.size(); pos += hops) out.push_back(stacked.segment(pos, hops));
  return out;
}

EnsembleStatistics build_statistics(const DesignScenario& scn,
                                    const std::vector<Eigen::VectorXd>& amps) {
  check_amps(scn, amps);
  const Index dim = scn.dim();
  EnsembleStatistics s;
  s.covariance = scn.noise_variance * Eigen::MatrixXcd::Identity(dim, dim);
  s.cross.resize(dim, scn.num_users());
  for (std::size_t k = 0; k < scn.users.size(); ++k) {
    const DesignUser& u = scn.users[k];
    const Eigen::MatrixXcd gamma = u.symbol_correlation().cast<Complex>();
    const Weighted w = weight(u, amps[k]);
    s.covariance.noalias() += w.sig * gamma * w.sig.adjoint();
    s.covariance.noalias() += w.prev * gamma * w.prev.adjoint();
    s.covariance.noalias() += w.next * gamma * w.next.adjoint();
    s.cross.col(Index(k)) = w.sig * u.relay_correlation.cast<Complex>();
  }
  if (!s.covariance.allFinite() || !s.cross.allFinite())
    throw NumericalError("statistics: non-finite entries");
  return s;
}

EnsembleStatistics build_statistics(const DesignScenario& scn,
                                    const std::vector<Eigen::VectorXd>& amps,
                                    const Eigen::MatrixXcd& filters, PowerMode mode) {
  EnsembleStatistics s = build_statistics(scn, amps);
  const int k_users = scn.num_users();
  const int hops = scn.hops();
  if (filters.rows() != scn.dim() || filters.cols() != k_users)
    throw std::invalid_argument("statistics: filter matrix has the wrong shape");

  // Response of every filter to every link of user l: G(j, k) = (S x_lj)^H w_k.
  auto responses = [&](const DesignUser& u) {
    return std::array<Eigen::MatrixXcd, 3>{u.signature.adjoint() * filters,
                                           u.spill_previous.adjoint() * filters,
                                           u.spill_next.adjoint() * filters};
  };

  if (mode == PowerMode::Global) {
    const Index n = Index(k_users) * hops;
    Eigen::MatrixXcd ra = Eigen::MatrixXcd::Zero(n, n);
    Eigen::VectorXcd pa(n);
    for (int l = 0; l < k_users; ++l) {
      const DesignUser& u = scn.users[std::size_t(l)];
      const Eigen::MatrixXcd gamma = u.symbol_correlation().cast<Complex>();
      const auto g = responses(u);
      Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(hops, hops);
      for (const auto& gs : g) block += gamma.cwiseProduct(gs * gs.adjoint());
      ra.block(Index(l) * hops, Index(l) * hops, hops, hops) = block;
      pa.segment(Index(l) * hops, hops) =
          u.relay_correlation.cast<Complex>().cwiseProduct(g[0].col(l));
    }
    s.power_cov.push_back(std::move(ra));
    s.power_cross.push_back(std::move(pa));
  } else {
    for (int k = 0; k < k_users; ++k) {
      const DesignUser& u = scn.users[std::size_t(k)];
      const Eigen::MatrixXcd gamma = u.symbol_correlation().cast<Complex>();
      const auto g = responses(u);
      Eigen::MatrixXcd ra = Eigen::MatrixXcd::Zero(hops, hops);
      for (const auto& gs : g) {
        const Eigen::VectorXcd own = gs.col(k);
        ra += gamma.cwiseProduct(own * own.adjoint());
      }
      s.power_cov.push_back(std::move(ra));
      s.power_cross.push_back(u.relay_correlation.cast<Complex>().cwiseProduct(g[0].col(k)));
    }
  }
  return s;
}

Eigen::MatrixXcd receiver_global(const EnsembleStatistics& stats) {
  Eigen::LLT<Eigen::MatrixXcd> llt(stats.covariance);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinReciprocalCondition)
    throw NumericalError("receiver: covariance is singular or ill-conditioned");
  return llt.solve(stats.cross);
}

Eigen::VectorXcd receiver_individual(const EnsembleStatistics& stats, int user) {
  Eigen::LLT<Eigen::MatrixXcd> llt(stats.covariance);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinReciprocalCondition)
    throw NumericalError("receiver: covariance is singular or ill-conditioned");
  return llt.solve(stats.cross.col(user));
}

Eigen::VectorXd project_to_sphere(const Eigen::VectorXcd& a, double budget) {
  const Eigen::VectorXd mag = a.cwiseAbs();
  const double n = mag.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw NumericalError("power projection: amplitude vector is degenerate");
  return mag * (std::sqrt(budget) / n);
}

namespace {

Eigen::VectorXcd regularized_solve(const Eigen::MatrixXcd& ra, const Eigen::VectorXcd& pa,
                                   double lambda) {
  const Eigen::MatrixXcd m = ra + lambda * Eigen::MatrixXcd::Identity(ra.rows(), ra.cols());
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(m);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < kMinReciprocalCondition)
    throw NumericalError("power step: regularized matrix is singular");
  Eigen::VectorXcd a = ldlt.solve(pa);
  if (!a.allFinite()) throw NumericalError("power step: non-finite solution");
  return a;
}

}  // namespace

Eigen::VectorXd power_global(const EnsembleStatistics& stats, double lambda, double budget) {
  if (stats.power_cov.size() != 1)
    throw std::invalid_argument("power_global: statistics were not built in global mode");
  return project_to_sphere(regularized_solve(stats.power_cov[0], stats.power_cross[0], lambda),
                           budget);
}

Eigen::VectorXd power_individual(const EnsembleStatistics& stats, double lambda, int user,
                                 double budget) {
  if (user < 0 || std::size_t(user) >= stats.power_cov.size())
    throw std::invalid_argument("power_individual: statistics were not built in individual mode");
  return project_to_sphere(
      regularized_solve(stats.power_cov[std::size_t(user)], stats.power_cross[std::size_t(user)],
                        lambda),
      budget);
}

Eigen::VectorXd user_mse(const EnsembleStatistics& stats, const Eigen::MatrixXcd& filters) {
  Eigen::VectorXd mse(filters.cols());
  for (Index k = 0; k < filters.cols(); ++k) {
    const Eigen::VectorXcd w = filters.col(k);
    mse(k) = 1.0 - 2.0 * std::real(w.dot(stats.cross.col(k))) +
             std::real(w.dot(stats.covariance * w));
  }
  return mse;
}

double ensemble_mse(const DesignScenario& scn, const std::vector<Eigen::VectorXd>& amps) {
  const EnsembleStatistics s = build_statistics(scn, amps);
  return user_mse(s, receiver_global(s)).sum();
}

AlternationResult alternate(const DesignScenario& scn, const MmseConfig& cfg, PowerMode mode) {
  cfg.validate();
  AlternationResult res;
  res.amplitudes = equal_power(scn);
  EnsembleStatistics stats = build_statistics(scn, res.amplitudes);
  res.filters = receiver_global(stats);
  res.initial_mse = user_mse(stats, res.filters).sum();

  for (int it = 1; it <= cfg.max_iters; ++it) {
    const EnsembleStatistics ps = build_statistics(scn, res.amplitudes, res.filters, mode);
    std::vector<Eigen::VectorXd> next;
    if (mode == PowerMode::Global) {
      next = unstack_amplitudes(power_global(ps, cfg.lambda_global, scn.total_budget()),
                                scn.hops());
    } else {
      for (int k = 0; k < scn.num_users(); ++k)
        next.push_back(power_individual(ps, cfg.lambda_individual, k, scn.budgets(k)));
    }
    const Eigen::VectorXd before = stack_amplitudes(res.amplitudes);
    const double change = (stack_amplitudes(next) - before).norm() / before.norm();

    res.amplitudes = std::move(next);
    stats = build_statistics(scn, res.amplitudes);
    res.filters = receiver_global(stats);
    res.mse_trace.push_back(user_mse(stats, res.filters).sum());
    res.iterations = it;
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace coopcdma
