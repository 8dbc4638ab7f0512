#include "coopcdma/mmse_designer.hpp"
#include "coopcdma/sim_harness.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace coopcdma;
using Catch::Approx;

namespace {

DesignScenario desk(int users, int relays, std::uint64_t draw, double snr_db = 12.0) {
  ExperimentConfig cfg;
  cfg.dims.users = users;
  cfg.dims.chips = 8;
  cfg.dims.taps = 2;
  cfg.dims.relays = relays;
  cfg.dims.packet_len = 10;
  const TrialScenario t = make_trial(cfg.dims, 17, draw, cfg.shadowing_std_db);
  return design_scenario(cfg, Scheme::JpaisGpc, snr_db, t);
}

// Real single-user, single-relay, flat-channel problem for the grid oracle.
DesignScenario real_desk() {
  DesignScenario scn;
  DesignUser u;
  Eigen::MatrixXd sig = Eigen::MatrixXd::Zero(8, 2);
  sig.col(0).head(4) << 0.5, -0.5, 0.5, 0.5;
  sig.col(1).tail(4) << -0.5, 0.5, 0.5, 0.5;
  sig.col(0) *= 0.6;
  sig.col(1) *= 1.3;
  u.signature = sig.cast<Complex>();
  u.spill_previous = Eigen::MatrixXcd::Zero(8, 2);
  u.spill_next = Eigen::MatrixXcd::Zero(8, 2);
  u.relay_correlation = Eigen::Vector2d(1.0, 0.85);
  scn.users.push_back(u);
  scn.noise_variance = 0.2;
  scn.budgets = Eigen::VectorXd::Constant(1, 1.0);
  return scn;
}

}  // namespace

TEST_CASE("covariance matches the sample covariance of simulated frames") {
  DesignScenario scn = desk(2, 1, 0);
  scn.users[0].relay_correlation = Eigen::Vector2d(1.0, 0.8);
  scn.users[1].relay_correlation = Eigen::Vector2d(1.0, 0.6);
  const std::vector<Eigen::VectorXd> amps{Eigen::Vector2d(0.9, 0.4), Eigen::Vector2d(0.5, 0.8)};
  const EnsembleStatistics s = build_statistics(scn, amps);

  // Hop symbols: s_0 = b, s_j = rho_j b + sqrt(1 - rho_j^2) v_j.
  Rng rng(123);
  auto hop_symbols = [&](const DesignUser& u, Complex b) {
    Eigen::VectorXcd x(u.hops());
    x(0) = b;
    for (Index j = 1; j < u.hops(); ++j) {
      const double rho = u.relay_correlation(j);
      x(j) = rho * b + std::sqrt(1.0 - rho * rho) * complex_gaussian(rng);
    }
    return x;
  };
  const int frames = 100000;
  const Index dim = scn.dim();
  Eigen::MatrixXcd sample = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::MatrixXcd cross = Eigen::MatrixXcd::Zero(dim, 2);
  std::bernoulli_distribution coin(0.5);
  auto qpsk = [&] { return modulate_qpsk(coin(rng), coin(rng)); };
  for (int f = 0; f < frames; ++f) {
    Eigen::VectorXcd r = complex_gaussian_vector(rng, dim, scn.noise_variance);
    Eigen::Vector2cd b;
    for (int k = 0; k < 2; ++k) {
      const DesignUser& u = scn.users[std::size_t(k)];
      const Eigen::VectorXcd a = amps[std::size_t(k)].cast<Complex>();
      b(k) = qpsk();
      r += u.signature * a.cwiseProduct(hop_symbols(u, b(k)));
      r += u.spill_previous * a.cwiseProduct(hop_symbols(u, qpsk()));
      r += u.spill_next * a.cwiseProduct(hop_symbols(u, qpsk()));
    }
    sample.noalias() += r * r.adjoint();
    cross.noalias() += r * b.adjoint();
  }
  sample /= double(frames);
  cross /= double(frames);
  CHECK((sample - s.covariance).norm() / s.covariance.norm() < 0.02);
  CHECK((cross - s.cross).norm() / s.cross.norm() < 0.02);
}

TEST_CASE("covariance reduces to noise when amplitudes vanish") {
  const DesignScenario scn = desk(2, 1, 1);
  const std::vector<Eigen::VectorXd> zero(2, Eigen::VectorXd::Zero(2));
  const EnsembleStatistics s = build_statistics(scn, zero);
  const Eigen::MatrixXcd noise =
      scn.noise_variance * Eigen::MatrixXcd::Identity(scn.dim(), scn.dim());
  CHECK((s.covariance - noise).norm() < 1e-15);
}

TEST_CASE("receivers solve the normal equations") {
  const DesignScenario scn = desk(2, 1, 2);
  const EnsembleStatistics s = build_statistics(scn, equal_power(scn));
  const Eigen::MatrixXcd w = receiver_global(s);
  const Eigen::MatrixXcd oracle = s.covariance.fullPivLu().solve(s.cross);
  CHECK((w - oracle).norm() / oracle.norm() < 1e-10);
  CHECK((s.covariance * w - s.cross).norm() / s.cross.norm() < 1e-10);
  for (int k = 0; k < 2; ++k)
    CHECK((receiver_individual(s, k) - oracle.col(k)).norm() / oracle.col(k).norm() < 1e-10);

  EnsembleStatistics identity = s;
  identity.covariance.setIdentity();
  CHECK((receiver_global(identity) - s.cross).norm() < 1e-14);
}

TEST_CASE("singular covariance is reported") {
  EnsembleStatistics s;
  s.covariance = Eigen::MatrixXcd::Zero(4, 4);
  s.cross = Eigen::MatrixXcd::Ones(4, 1);
  CHECK_THROWS_AS(receiver_global(s), NumericalError);
}

TEST_CASE("power steps solve the regularized system and land on the sphere") {
  const DesignScenario scn = desk(3, 2, 3);
  const std::vector<Eigen::VectorXd> amps = equal_power(scn);
  const Eigen::MatrixXcd w = receiver_global(build_statistics(scn, amps));
  const double lambda = 0.025;

  const EnsembleStatistics g = build_statistics(scn, amps, w, PowerMode::Global);
  const Index n = g.power_cov[0].rows();
  const Eigen::VectorXcd raw =
      (g.power_cov[0] + lambda * Eigen::MatrixXcd::Identity(n, n)).fullPivLu().solve(
          g.power_cross[0]);
  const Eigen::VectorXd expected = raw.cwiseAbs() * std::sqrt(scn.total_budget()) / raw.norm();
  const Eigen::VectorXd a = power_global(g, lambda, scn.total_budget());
  CHECK((a - expected).norm() < 1e-10);
  CHECK(a.squaredNorm() == Approx(scn.total_budget()).epsilon(1e-12));

  const EnsembleStatistics ind = build_statistics(scn, amps, w, PowerMode::Individual);
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd ak = power_individual(ind, lambda, k, scn.budgets(k));
    CHECK(std::abs(ak.squaredNorm() - scn.budgets(k)) < 1e-10);
  }
}

TEST_CASE("projected amplitude ignores a common scale of R_a and p_a") {
  const DesignScenario scn = desk(2, 2, 4);
  const std::vector<Eigen::VectorXd> amps = equal_power(scn);
  const Eigen::MatrixXcd w = receiver_global(build_statistics(scn, amps));
  EnsembleStatistics s = build_statistics(scn, amps, w, PowerMode::Global);
  const Eigen::VectorXd a0 = power_global(s, 0.0, 2.0);
  s.power_cov[0] *= 7.5;
  s.power_cross[0] *= 7.5;
  CHECK((power_global(s, 0.0, 2.0) - a0).norm() < 1e-12);
}

TEST_CASE("power step agrees with a grid search on the sphere") {
  const DesignScenario scn = real_desk();
  const std::vector<Eigen::VectorXd> start = equal_power(scn);
  const Eigen::MatrixXcd w = receiver_global(build_statistics(scn, start));
  const EnsembleStatistics s = build_statistics(scn, start, w, PowerMode::Individual);
  const Eigen::Matrix2d ra = s.power_cov[0].real();
  const Eigen::Vector2d pa = s.power_cross[0].real();
  REQUIRE(s.power_cov[0].imag().norm() < 1e-14);

  // Brute force: J(a) = a^T R_a a - 2 p_a^T a over the unit circle.
  const int steps = 200000;
  double best = 1e300, best_t = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = 2.0 * std::numbers::pi * i / steps;
    const Eigen::Vector2d a(std::cos(t), std::sin(t));
    const double j = a.dot(ra * a) - 2.0 * pa.dot(a);
    if (j < best) {
      best = j;
      best_t = t;
    }
  }
  const Eigen::Vector2d grid(std::cos(best_t), std::sin(best_t));

  // The projected solve equals the sphere minimizer when lambda is the
  // multiplier that puts the unprojected solution on the sphere.
  auto norm_at = [&](double mu) {
    return (ra + mu * Eigen::Matrix2d::Identity()).ldlt().solve(pa).norm();
  };
  const double lo0 = -ra.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff();
  double lo = lo0 + 1e-12, hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_at(mid) > 1.0 ? lo : hi) = mid;
  }
  const Eigen::VectorXd a = power_individual(s, 0.5 * (lo + hi), 0, 1.0);
  CHECK((a - grid.cwiseAbs()).norm() < 1e-4);
}

TEST_CASE("single-hop users have a constraint-determined amplitude") {
  const DesignScenario scn = desk(2, 0, 5);
  MmseConfig cfg;
  const AlternationResult r = alternate(scn, cfg, PowerMode::Individual);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  for (int k = 0; k < 2; ++k) CHECK(r.amplitudes[std::size_t(k)](0) == Approx(1.0));
}

TEST_CASE("alternation never ends above the equal-power start") {
  MmseConfig cfg;
  for (std::uint64_t d = 0; d < 5; ++d) {
    const DesignScenario scn = desk(4, 2, 10 + d);
    for (PowerMode mode : {PowerMode::Global, PowerMode::Individual}) {
      const AlternationResult r = alternate(scn, cfg, mode);
      CHECK(int(r.mse_trace.size()) <= cfg.max_iters);
      CHECK(r.mse_trace.back() <= r.initial_mse + 1e-12);
      if (mode == PowerMode::Global) {
        CHECK(std::abs(stack_amplitudes(r.amplitudes).squaredNorm() - scn.total_budget()) < 1e-10);
      } else {
        for (std::size_t k = 0; k < r.amplitudes.size(); ++k)
          CHECK(std::abs(r.amplitudes[k].squaredNorm() - scn.budgets(Index(k))) < 1e-10);
      }
    }
  }
}

TEST_CASE("equal power splits each budget over the hops") {
  const DesignScenario scn = desk(3, 2, 6);
  for (const auto& a : equal_power(scn)) CHECK((a.array() - std::sqrt(1.0 / 3.0)).abs().maxCoeff() < 1e-15);
  const Eigen::VectorXd stacked = stack_amplitudes(equal_power(scn));
  CHECK(stacked.size() == 9);
  CHECK(unstack_amplitudes(stacked, 3).size() == 3);
}

TEST_CASE("projection rejects a zero vector") {
  CHECK_THROWS_AS(project_to_sphere(Eigen::VectorXcd::Zero(3), 1.0), NumericalError);
  const Eigen::VectorXd p = project_to_sphere(Eigen::Vector2cd(Complex(0, -3), Complex(4, 0)), 4.0);
  CHECK(p(0) == Approx(1.2));
  CHECK(p(1) == Approx(1.6));
}

TEST_CASE("config validation") {
  MmseConfig cfg;
  cfg.lambda_global = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = MmseConfig{};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
