#include "coopcdma/rls_gpc.hpp"
#include "coopcdma/rls_ipc.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace coopcdma;
using Catch::Approx;

namespace {

constexpr double kAlpha = 0.998;
constexpr double kDelta = 0.01;

double rel(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).norm() / b.norm(); }

std::vector<SpreadingBasis> random_bases(int users, int chips, int taps, Rng& rng) {
  std::vector<SpreadingBasis> b;
  for (int k = 0; k < users; ++k) b.emplace_back(SpreadingCode::random(chips, rng), taps);
  return b;
}

Complex random_qpsk(Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  return modulate_qpsk(coin(rng), coin(rng));
}

}  // namespace

TEMPLATE_TEST_CASE("inverse correlation tracks the dense inverse", "", double,
                   std::complex<double>) {
  using Matrix = Eigen::Matrix<TestType, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<TestType, Eigen::Dynamic, 1>;
  const Index dim = 12;
  InverseCorrelation<TestType> phi(dim, kDelta);
  Matrix r = kDelta * Matrix::Identity(dim, dim);
  Rng rng(4);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    Vector x(dim);
    for (Index i = 0; i < dim; ++i) {
      const Complex c = complex_gaussian(rng);
      if constexpr (std::is_same_v<TestType, double>)
        x(i) = c.real();
      else
        x(i) = c;
    }
    phi.update(x, kAlpha);
    r = kAlpha * r + x * x.adjoint();
    const Matrix dense = r.inverse();
    worst = std::max(worst, double((phi.matrix() - dense).norm() / dense.norm()));
  }
  CHECK(worst < 1e-8);
  CHECK((phi.matrix() - phi.matrix().adjoint()).norm() == 0.0);
}

TEST_CASE("inverse correlation rejects a non-finite regressor") {
  InverseCorrelation<Complex> phi(3, kDelta);
  Eigen::VectorXcd x = Eigen::VectorXcd::Ones(3);
  x(1) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(phi.update(x, kAlpha), NumericalError);
}

TEST_CASE("receiver recursion equals the regularized least-squares filter") {
  Rng rng(8);
  const Index dim = 2 * 10, users = 2;
  ReceiverRlsState s{InverseCorrelation<Complex>(dim, kDelta), Eigen::MatrixXcd::Zero(dim, users),
                     kAlpha};
  s.filters.col(0).setConstant(0.1);
  const Eigen::MatrixXcd w0 = s.filters;
  Eigen::MatrixXcd r_acc = kDelta * Eigen::MatrixXcd::Identity(dim, dim);
  Eigen::MatrixXcd p_acc = kDelta * w0;
  for (int n = 0; n < 200; ++n) {
    const Eigen::VectorXcd r = complex_gaussian_vector(rng, dim);
    Eigen::VectorXcd d(users);
    for (Index k = 0; k < users; ++k) d(k) = random_qpsk(rng);
    const Eigen::MatrixXcd before = s.filters;
    const Eigen::VectorXcd xi = receiver_update(s, r, d);
    CHECK((xi - (d - before.adjoint() * r)).norm() < 1e-12);
    r_acc = kAlpha * r_acc + r * r.adjoint();
    p_acc = kAlpha * p_acc + r * d.adjoint();
  }
  const Eigen::MatrixXcd oracle = r_acc.fullPivLu().solve(p_acc);
  CHECK(rel(s.filters, oracle) < 1e-8);
  CHECK(rel(s.phi.matrix(), r_acc.inverse()) < 1e-8);
}

TEST_CASE("power recursion keeps the dense inverse including the load") {
  Rng rng(15);
  const int users = 2, hops = 2;
  const Index m = 10, dim = m * hops, n = users * hops;
  const double lambda = 0.025;

  std::vector<SignatureImages> images;
  for (int k = 0; k < users; ++k) {
    SignatureImages x;
    x.current = 0.3 * Eigen::MatrixXcd::Random(dim, hops);
    x.previous = 0.1 * Eigen::MatrixXcd::Random(dim, hops);
    x.next = 0.1 * Eigen::MatrixXcd::Random(dim, hops);
    images.push_back(x);
  }
  PowerRlsState s{InverseCorrelation<Complex>(n, kDelta), Eigen::VectorXd::Constant(n, 1.0),
                  4.0, kAlpha, 0.0, lambda, 0};
  Eigen::MatrixXcd r_acc = kDelta * Eigen::MatrixXcd::Identity(n, n);
  for (int step = 0; step < 200; ++step) {
    const Eigen::MatrixXcd w = complex_gaussian_vector(rng, dim * users).reshaped(dim, users);
    SymbolContext ctx;
    ctx.current.resize(users);
    ctx.previous.resize(users);
    ctx.next.resize(users);
    for (int k = 0; k < users; ++k) {
      ctx.current(k) = random_qpsk(rng);
      ctx.previous(k) = random_qpsk(rng);
      ctx.next(k) = step % 2 ? random_qpsk(rng) : Complex(0.0);
    }
    // Regressor oracle: everything user l's links put into filter k's output.
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, users);
    for (int l = 0; l < users; ++l)
      for (int k = 0; k < users; ++k)
        for (int j = 0; j < hops; ++j) {
          const auto& x = images[std::size_t(l)];
          u(l * hops + j, k) = std::conj(ctx.current(l)) * x.current.col(j).dot(w.col(k)) +
                               std::conj(ctx.previous(l)) * x.previous.col(j).dot(w.col(k)) +
                               std::conj(ctx.next(l)) * x.next.col(j).dot(w.col(k));
        }
    const Index c = s.cursor;
    const Eigen::MatrixXcd used = power_update(s, w, images, ctx);
    CHECK(rel(used, u) < 1e-12);
    r_acc = kAlpha * r_acc + u * u.adjoint();
    r_acc(c, c) += double(n) * lambda;
    CHECK(std::abs(s.amplitudes.squaredNorm() - s.budget) < 1e-10);
  }
  CHECK(rel(s.phi.matrix(), r_acc.inverse()) < 1e-8);
  CHECK(s.max_violation < 1e-10);
}

TEST_CASE("channel recursion equals the regularized least-squares estimate") {
  Rng rng(23);
  const int users = 2, hops = 2, taps = 3;
  const auto bases = random_bases(users, 8, taps, rng);
  const Index dim = users * hops * taps;
  ChannelRlsState s = ChannelRlsState::create(dim, kAlpha, kDelta, Eigen::VectorXcd::Zero(dim));
  const std::vector<Eigen::VectorXd> amps(users, Eigen::Vector2d(0.8, 0.6));
  Eigen::MatrixXcd r_acc = kDelta * Eigen::MatrixXcd::Identity(dim, dim);
  Eigen::VectorXcd p_acc = Eigen::VectorXcd::Zero(dim);
  for (int n = 0; n < 200; ++n) {
    SymbolContext ctx{Eigen::VectorXcd(users), Eigen::VectorXcd(users), Eigen::VectorXcd(users), {}};
    for (int k = 0; k < users; ++k) {
      ctx.current(k) = random_qpsk(rng);
      ctx.previous(k) = random_qpsk(rng);
      ctx.next(k) = random_qpsk(rng);
    }
    const Eigen::MatrixXcd v = channel_regressor(bases, ctx, amps);
    const Eigen::VectorXcd r = complex_gaussian_vector(rng, v.rows());
    channel_update(s, r, v);
    r_acc = kAlpha * r_acc + v.adjoint() * v;
    p_acc = kAlpha * p_acc + v.adjoint() * r;
  }
  CHECK(rel(s.rh_inv.matrix(), r_acc.inverse()) < 1e-8);
  CHECK(rel(s.estimate, r_acc.fullPivLu().solve(p_acc)) < 1e-8);
}

TEST_CASE("channel regressor reproduces the received signal") {
  Rng rng(31);
  const int users = 2, hops = 2, taps = 3, chips = 8;
  const auto bases = random_bases(users, chips, taps, rng);
  Eigen::VectorXcd h(users * hops * taps);
  for (Index i = 0; i < h.size(); ++i) h(i) = complex_gaussian(rng);
  const std::vector<Eigen::VectorXd> amps{Eigen::Vector2d(0.9, 0.3), Eigen::Vector2d(0.5, 0.7)};
  SymbolContext ctx{Eigen::Vector2cd(random_qpsk(rng), random_qpsk(rng)),
                    Eigen::Vector2cd(random_qpsk(rng), random_qpsk(rng)),
                    Eigen::Vector2cd(random_qpsk(rng), random_qpsk(rng)),
                    {}};
  // Same observation built from signature images.
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero((chips + taps - 1) * hops);
  for (int k = 0; k < users; ++k) {
    const SignatureImages x =
        signature_images(bases[std::size_t(k)], h.segment(k * hops * taps, hops * taps), hops);
    const Eigen::VectorXcd a = amps[std::size_t(k)].cast<Complex>();
    r += ctx.current(k) * x.current * a + ctx.previous(k) * x.previous * a +
         ctx.next(k) * x.next * a;
  }
  CHECK((channel_regressor(bases, ctx, amps) * h - r).norm() < 1e-13);
}

TEST_CASE("noise-free training identifies the channel") {
  Rng rng(37);
  const int taps = 3, hops = 2;
  const auto bases = random_bases(1, 8, taps, rng);
  ChannelVector h(hops * taps);
  h << generate_multipath_channel(taps, rng), generate_multipath_channel(taps, rng);
  ChannelRlsState s = ChannelRlsState::create(h.size(), kAlpha, kDelta, Eigen::VectorXcd::Zero(h.size()));
  const Eigen::VectorXd amps = Eigen::Vector2d::Constant(std::sqrt(0.5));
  Complex prev = 0.0, cur = random_qpsk(rng);
  for (int n = 0; n < 200; ++n) {
    const Complex next = random_qpsk(rng);
    const Eigen::MatrixXcd v = user_channel_regressor(bases[0], cur, prev, next, amps);
    channel_update(s, v * h, v);
    prev = cur;
    cur = next;
  }
  CHECK((s.estimate - h).norm() / h.norm() < 1e-3);
}

TEST_CASE("regularization step adds one weighted coordinate") {
  InverseCorrelation<Complex> phi(3, 1.0);
  Eigen::VectorXcd a = Eigen::VectorXcd::Ones(3);
  Index cursor = 2;
  regularization_update(phi, a, Eigen::Vector3d(0.1, 0.2, 0.5), cursor);
  CHECK(cursor == 0);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(3, 3);
  expected(2, 2) += 3.0 * 0.5;
  CHECK((phi.matrix() - expected.inverse().cast<Complex>()).norm() < 1e-14);
  // Target zero on that coordinate: a(2) shrinks by the usual RLS gain.
  CHECK(a(2).real() == Approx(1.0 / 2.5));
  CHECK(a(0).real() == Approx(1.0));
}

TEST_CASE("one-user IPC coincides with GPC") {
  Rng rng(41);
  const int taps = 2, hops = 2, chips = 8;
  const auto bases = random_bases(1, chips, taps, rng);
  const Eigen::VectorXd a0 = Eigen::Vector2d::Constant(std::sqrt(0.5));
  Eigen::VectorXcd h0(hops * taps);
  for (Index i = 0; i < h0.size(); ++i) h0(i) = complex_gaussian(rng, 0.1);

  GpcEstimator gpc(bases, hops, kAlpha, kDelta, 1.0, a0, h0, true);
  IpcEstimator ipc(bases, hops, kAlpha, kDelta, Eigen::VectorXd::Ones(1), {a0}, {h0}, true);
  gpc.set_power_regularization(0.025);
  ipc.set_power_regularization(0.025);
  for (int n = 0; n < 100; ++n) {
    const Eigen::VectorXcd r = complex_gaussian_vector(rng, hops * (chips + taps - 1));
    SymbolContext ctx{Eigen::VectorXcd::Constant(1, random_qpsk(rng)),
                      Eigen::VectorXcd::Constant(1, random_qpsk(rng)), Eigen::VectorXcd::Zero(1),
                      {}};
    CHECK(std::abs(gpc.outputs(r)(0) - ipc.outputs(r)(0)) < 1e-9);
    gpc.step(r, ctx);
    ipc.step(r, ctx);
  }
  CHECK((gpc.amplitudes()[0] - ipc.amplitudes()[0]).norm() < 1e-9);
  CHECK((gpc.user_channels(0) - ipc.users()[0].channel.estimate).norm() < 1e-9);
  CHECK(rel(gpc.receiver().filters, ipc.filters()) < 1e-9);
}

TEST_CASE("IPC users never exceed their own budgets") {
  Rng rng(43);
  const int users = 3, hops = 3, taps = 2, chips = 8;
  const auto bases = random_bases(users, chips, taps, rng);
  const Eigen::Vector3d budgets(1.0, 2.0, 0.5);
  std::vector<Eigen::VectorXd> a0;
  std::vector<Eigen::VectorXcd> h0;
  for (int k = 0; k < users; ++k) {
    a0.push_back(Eigen::VectorXd::Constant(hops, std::sqrt(budgets(k) / hops)));
    h0.push_back(complex_gaussian_vector(rng, hops * taps, 0.1));
  }
  IpcEstimator ipc(bases, hops, kAlpha, kDelta, budgets, a0, h0, true);
  ipc.set_power_regularization(0.025);
  for (int n = 0; n < 150; ++n) {
    SymbolContext ctx{Eigen::VectorXcd(users), Eigen::VectorXcd::Zero(users),
                      Eigen::VectorXcd::Zero(users), {}};
    for (int k = 0; k < users; ++k) ctx.current(k) = random_qpsk(rng);
    ipc.step(complex_gaussian_vector(rng, hops * (chips + taps - 1)), ctx);
    const auto amps = ipc.amplitudes();
    for (int k = 0; k < users; ++k)
      REQUIRE(std::abs(amps[std::size_t(k)].squaredNorm() - budgets(k)) < 1e-10);
  }
}
