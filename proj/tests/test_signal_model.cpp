#include "coopcdma/signal_model.hpp"

#include <catch_amalgamated.hpp>

#include <vector>

using namespace coopcdma;
using Catch::Approx;

namespace {

// Chip-rate linear convolution of a symbol stream, done the slow way.
Eigen::VectorXcd chip_convolve(const Eigen::VectorXd& code, const Eigen::VectorXcd& h,
                               const std::vector<Complex>& symbols) {
  const Index n = code.size(), l = h.size();
  Eigen::VectorXcd chips = Eigen::VectorXcd::Zero(Index(symbols.size()) * n);
  for (std::size_t s = 0; s < symbols.size(); ++s)
    chips.segment(Index(s) * n, n) = symbols[s] * code.cast<Complex>();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(chips.size() + l - 1);
  for (Index t = 0; t < chips.size(); ++t)
    for (Index c = 0; c < l; ++c) out(t + c) += h(c) * chips(t);
  return out;
}

}  // namespace

TEST_CASE("convolution matrix shifts the code one chip per tap") {
  Eigen::Vector3d code(1.0, -2.0, 3.0);
  const Eigen::MatrixXd d = convolution_matrix(code, 2);
  Eigen::MatrixXd expected(4, 2);
  expected << 1, 0, -2, 1, 3, -2, 0, 3;
  CHECK(d == expected);
  CHECK_THROWS_AS(convolution_matrix(code, 0), std::invalid_argument);
}

TEST_CASE("block signature replicates the block on the diagonal") {
  Eigen::MatrixXd block(2, 1);
  block << 1.0, 2.0;
  const Eigen::MatrixXd c = block_signature(block, 2);
  REQUIRE(c.rows() == 6);
  REQUIRE(c.cols() == 3);
  for (Index j = 0; j < 3; ++j) {
    CHECK(c.block(2 * j, j, 2, 1) == block);
    CHECK(c.col(j).sum() == Approx(3.0));
  }
  CHECK_THROWS_AS(block_signature(block, -1), std::invalid_argument);
}

TEST_CASE("stacked signature equals C H") {
  Rng rng(7);
  const SpreadingCode code = SpreadingCode::random(8, rng);
  std::vector<ChannelVector> hops;
  for (int j = 0; j < 3; ++j) hops.push_back(generate_multipath_channel(3, rng));
  const Eigen::MatrixXd d = build_convolution_matrix(code, 3);
  const Eigen::MatrixXcd dense =
      build_block_signature(d, 2).cast<Complex>() * build_channel_matrix(hops);
  CHECK((stacked_signature(d, hops) - dense).norm() < 1e-14);
}

TEST_CASE("spill images reproduce chip-rate convolution") {
  Rng rng(11);
  const int n = 8, l = 4;
  const SpreadingCode code = SpreadingCode::random(n, rng);
  const ChannelVector h = generate_multipath_channel(l, rng);
  const std::vector<Complex> b{modulate_qpsk(0, 1), modulate_qpsk(1, 1), modulate_qpsk(1, 0)};

  const Eigen::VectorXcd full = chip_convolve(code.chips, h, b);
  const Index m = n + l - 1;
  const Eigen::VectorXcd window = full.segment(n, m);  // chips of the middle symbol

  const Eigen::VectorXcd dh = build_convolution_matrix(code, l) * h;
  const Eigen::VectorXcd model = b[1] * dh + spill(Eigen::VectorXcd(b[0] * dh), m, n, Spill::Previous) +
                                 spill(Eigen::VectorXcd(b[2] * dh), m, n, Spill::Next);
  CHECK((model - window).norm() < 1e-13);
}

TEST_CASE("spill is empty without multipath") {
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(8);
  CHECK(spill(x, 8, 8, Spill::Previous).isZero());
  CHECK(spill(x, 8, 8, Spill::Next).isZero());
}

TEST_CASE("generated channels have unit norm") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) CHECK(generate_multipath_channel(3, rng).norm() == Approx(1.0));
  CHECK_THROWS_AS(generate_multipath_channel(0, rng), std::invalid_argument);
}

TEST_CASE("spreading codes are unit norm binary") {
  Rng rng(5);
  const SpreadingCode c = SpreadingCode::random(16, rng);
  CHECK(c.chips.norm() == Approx(1.0));
  CHECK((c.chips.array().abs() - 0.25).abs().maxCoeff() < 1e-15);
  const SpreadingCode s = SpreadingCode::from_signs({1, -1, 1, 1});
  CHECK(s.chips(1) == Approx(-0.5));
}

TEST_CASE("qpsk round trip and decision regions") {
  for (int bi = 0; bi < 2; ++bi)
    for (int bq = 0; bq < 2; ++bq) {
      const Complex s = modulate_qpsk(bi, bq);
      CHECK(std::norm(s) == Approx(1.0));
      const auto d = demodulate_qpsk(s);
      CHECK(d[0] == bi);
      CHECK(d[1] == bq);
      // small perturbations inside the quadrant keep the decision
      for (double dx : {-0.3, 0.3})
        for (double dy : {-0.3, 0.3}) CHECK(demodulate_qpsk(s + Complex(dx, dy)) == d);
    }
}

TEST_CASE("complex gaussian has the requested variance") {
  Rng rng(21);
  const Eigen::VectorXcd v = complex_gaussian_vector(rng, 200000, 2.5);
  const double var = v.squaredNorm() / double(v.size());
  CHECK(var == Approx(2.5).epsilon(0.02));
  CHECK(std::abs(v.mean()) < 0.02);
  const double re = v.real().squaredNorm() / double(v.size());
  CHECK(re == Approx(1.25).epsilon(0.02));
}

TEST_CASE("received frame adds signal, isi and noise") {
  SystemDims dims;
  dims.users = 2;
  dims.chips = 8;
  dims.taps = 2;
  dims.relays = 1;
  Rng rng(9);
  std::vector<Eigen::MatrixXd> sig;
  std::vector<Eigen::MatrixXcd> ch;
  std::vector<SymbolFrame> sym;
  std::vector<AmplitudeVector> amps;
  for (int k = 0; k < dims.users; ++k) {
    const SpreadingCode code = SpreadingCode::random(dims.chips, rng);
    sig.push_back(build_block_signature(build_convolution_matrix(code, dims.taps), dims.relays));
    ch.push_back(build_channel_matrix(
        {generate_multipath_channel(dims.taps, rng), generate_multipath_channel(dims.taps, rng)}));
    sym.push_back(SymbolFrame::repeated(modulate_qpsk(k, 0), dims.relays));
    amps.push_back(AmplitudeVector::Constant(2, 0.5));
  }
  const Eigen::VectorXcd isi = Eigen::VectorXcd::Constant(dims.stacked(), Complex(0.1, 0.0));

  Rng noise_free(1);
  const ReceivedFrame f = assemble_received_frame(dims, sig, ch, sym, amps, isi, 0.0, noise_free);
  Eigen::VectorXcd expected = isi;
  for (int k = 0; k < dims.users; ++k)
    for (int j = 0; j < 2; ++j)
      expected += sig[std::size_t(k)].cast<Complex>() * ch[std::size_t(k)].col(j) * 0.5 *
                  sym[std::size_t(k)].stacked()(j);
  CHECK((f.total - expected).norm() < 1e-14);
  CHECK(f.noise.isZero());

  amps[1] = AmplitudeVector::Constant(3, 0.5);
  try {
    assemble_received_frame(dims, sig, ch, sym, amps, isi, 0.0, noise_free);
    FAIL("shape mismatch not reported");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("user 1") != std::string::npos);
  }
}

TEST_CASE("system dims reject unsupported delay spread") {
  SystemDims d;
  d.chips = 4;
  d.taps = 6;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d.taps = 5;
  CHECK_NOTHROW(d.validate());
  CHECK(d.window() == 8);
}
