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

#include "coopcdma/sim_harness.hpp"

#include "coopcdma/coop_protocol.hpp"
#include "coopcdma/rls_gpc.hpp"
#include "coopcdma/rls_ipc.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

namespace coopcdma {

namespace {

// Sub-stream offsets inside the per-trial streams.
constexpr std::uint64_t kUserStride = 1024;
constexpr std::uint64_t kRelayOffset = 512;
// Design-side noise floor so the closed-form R stays invertible at sigma^2 = 0.
constexpr double kDesignNoiseFloor = 1e-9;
constexpr double kEstimatorInitVariance = 1e-6;

bool cooperative(Scheme s) { return s != Scheme::Ncis; }

int scheme_hops(const SystemDims& d, Scheme s) { return cooperative(s) ? d.hops() : 1; }

/// Per-user matrices mapping hop symbols to the stacked received vector.
struct UserImage {
  Eigen::MatrixXcd current, previous, next;
};

std::vector<UserImage> images_of(const DesignScenario& scn) {
  std::vector<UserImage> out;
  for (const DesignUser& u : scn.users) out.push_back({u.signature, u.spill_previous, u.spill_next});
  return out;
}

/// Hop symbols of user k at symbol i: the source symbol then each relay's forwarded value.
Eigen::VectorXcd hop_symbols(const TrialScenario& t, const std::vector<Eigen::MatrixXcd>& forwarded,
                             int hops, int user, int i) {
  Eigen::VectorXcd s = Eigen::VectorXcd::Zero(hops);
  if (i < 0 || i >= t.links.dims.packet_len) return s;
  s(0) = t.symbols[std::size_t(user)][std::size_t(i)];
  for (int j = 1; j < hops; ++j) s(j) = forwarded[std::size_t(j - 1)](user, i);
  return s;
}

/// Noise-free received vector plus scaled destination noise.
Eigen::VectorXcd received_vector(const TrialScenario& t, const std::vector<UserImage>& img,
                                 const std::vector<Eigen::VectorXd>& amps,
                                 const std::vector<Eigen::MatrixXcd>& forwarded, int hops, int i,
                                 double sigma) {
  const Index m = t.links.dims.window();
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero(m * hops);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const Eigen::VectorXcd a = amps[k].cast<Complex>();
    const int kk = int(k);
    r.noalias() += img[k].current * a.cwiseProduct(hop_symbols(t, forwarded, hops, kk, i));
    r.noalias() += img[k].previous * a.cwiseProduct(hop_symbols(t, forwarded, hops, kk, i - 1));
    r.noalias() += img[k].next * a.cwiseProduct(hop_symbols(t, forwarded, hops, kk, i + 1));
  }
  for (int j = 0; j < hops; ++j)
    r.segment(j * m, m) += sigma * t.destination_noise[std::size_t(j)].col(i);
  return r;
}

/// Source->relay observation of relay j at symbol i.
Eigen::VectorXcd relay_observation(const TrialScenario& t, const std::vector<UserImage>& img,
                                   double source_amp, int relay, int i, double sigma) {
  const int p = t.links.dims.packet_len;
  Eigen::VectorXcd r = sigma * t.relay_noise[std::size_t(relay)].col(i);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const auto& b = t.symbols[k];
    r += source_amp * b[std::size_t(i)] * img[k].current.col(0);
    if (i > 0) r += source_amp * b[std::size_t(i - 1)] * img[k].previous.col(0);
    if (i + 1 < p) r += source_amp * b[std::size_t(i + 1)] * img[k].next.col(0);
  }
  return r;
}

int count_bit_errors(Complex soft, const std::array<int, 2>& bits) {
  const auto d = demodulate_qpsk(soft);
  return int(d[0] != bits[0]) + int(d[1] != bits[1]);
}

Eigen::VectorXd source_amplitudes(const ExperimentConfig& cfg) {
  return Eigen::VectorXd::Constant(cfg.dims.users, std::sqrt(cfg.user_power));
}

/// Forwarded symbols of every relay for the whole packet, exact MMSE front ends.
std::vector<Eigen::MatrixXcd> exact_forwarding(const ExperimentConfig& cfg, const TrialScenario& t,
                                               double sigma2) {
  const SystemDims& d = cfg.dims;
  const double sigma = std::sqrt(sigma2);
  const Eigen::VectorXd src = source_amplitudes(cfg);
  std::vector<Eigen::MatrixXcd> out;
  for (int j = 0; j < d.relays; ++j) {
    const DesignScenario scn =
        relay_design_scenario(t.links, j, src, std::max(sigma2, kDesignNoiseFloor));
    const ExactRelay relay = exact_relay(scn, src);
    const auto img = images_of(scn);
    Eigen::MatrixXcd fwd(d.users, d.packet_len);
    for (int i = 0; i < d.packet_len; ++i) {
      const Eigen::VectorXcd r = relay_observation(t, img, src(0), j, i, sigma);
      for (int k = 0; k < d.users; ++k) fwd(k, i) = relay_forward(r, relay.state, k);
    }
    out.push_back(std::move(fwd));
  }
  return out;
}

void record_symbol(PacketResult& res, const TrialScenario& t, const Eigen::VectorXcd& y, int i,
                   int training) {
  int errors = 0;
  for (Index k = 0; k < y.size(); ++k)
    errors += count_bit_errors(y(k), t.bits[std::size_t(k)][std::size_t(i)]);
  res.symbol_errors[std::size_t(i)] = errors;
  if (i >= training) res.bit_errors += errors;
}

void run_exact(const ExperimentConfig& cfg, Scheme scheme, double snr_db, const TrialScenario& t,
               PacketResult& res) {
  const SystemDims& d = cfg.dims;
  const double sigma2 = noise_variance(snr_db, cfg.user_power);
  const int hops = scheme_hops(d, scheme);
  const DesignScenario scn = design_scenario(cfg, scheme, snr_db, t);
  const std::vector<Eigen::MatrixXcd> forwarded =
      hops > 1 ? exact_forwarding(cfg, t, sigma2) : std::vector<Eigen::MatrixXcd>{};

  std::vector<Eigen::VectorXd> amps;
  Eigen::MatrixXcd w;
  if (scheme == Scheme::JpaisGpc || scheme == Scheme::JpaisIpc) {
    const AlternationResult alt = alternate(
        scn, cfg.mmse(), scheme == Scheme::JpaisGpc ? PowerMode::Global : PowerMode::Individual);
    amps = alt.amplitudes;
    w = alt.filters;
  } else {
    amps = equal_power(scn);
    w = receiver_global(build_statistics(scn, amps));
  }
  const auto img = images_of(scn);
  const double sigma = std::sqrt(sigma2);
  for (int i = 0; i < d.packet_len; ++i) {
    const Eigen::VectorXcd r = received_vector(t, img, amps, forwarded, hops, i, sigma);
    record_symbol(res, t, w.adjoint() * r, i, cfg.training_len);
  }
  res.final_amplitudes = amps;
}

/// Destination-side adaptive estimator behind one interface.
class AdaptiveDestination {
 public:
  AdaptiveDestination(const ExperimentConfig& cfg, Scheme scheme, const TrialScenario& t,
                      int hops) {
    const SystemDims& d = cfg.dims;
    std::vector<SpreadingBasis> bases;
    std::vector<Eigen::VectorXcd> init;
    for (int k = 0; k < d.users; ++k) {
      bases.emplace_back(t.links.users[std::size_t(k)].code, d.taps);
      init.push_back(t.estimator_init[std::size_t(k)].head(Index(hops) * d.taps));
    }
    DesignScenario shape;
    shape.budgets = Eigen::VectorXd::Constant(d.users, cfg.user_power);
    shape.users.resize(std::size_t(d.users));
    for (auto& u : shape.users) u.signature = Eigen::MatrixXcd::Zero(1, hops);
    const auto amps = equal_power(shape);
    const bool power = scheme == Scheme::JpaisGpc || scheme == Scheme::JpaisIpc;
    if (scheme == Scheme::JpaisGpc) {
      Eigen::VectorXcd stacked(Index(d.users) * hops * d.taps);
      for (int k = 0; k < d.users; ++k)
        stacked.segment(Index(k) * hops * d.taps, Index(hops) * d.taps) = init[std::size_t(k)];
      gpc_.emplace(bases, hops, cfg.alpha, kDefaultDelta, shape.total_budget(),
                   stack_amplitudes(amps), stacked, power);
      gpc_->set_power_regularization(cfg.lambda_T);
    } else {
      ipc_.emplace(bases, hops, cfg.alpha, kDefaultDelta, shape.budgets, amps, init, power);
      ipc_->set_power_regularization(cfg.lambda);
    }
  }

  Eigen::VectorXcd outputs(const Eigen::VectorXcd& r) const {
    return gpc_ ? gpc_->outputs(r) : ipc_->outputs(r);
  }
  void set_power_adaptation(bool on) {
    if (gpc_)
      gpc_->set_power_adaptation(on);
    else
      ipc_->set_power_adaptation(on);
  }
  void step(const Eigen::VectorXcd& r, const SymbolContext& s) {
    if (gpc_)
      gpc_->step(r, s);
    else
      ipc_->step(r, s);
  }
  std::vector<Eigen::VectorXd> amplitudes() const {
    return gpc_ ? gpc_->amplitudes() : ipc_->amplitudes();
  }
  Eigen::VectorXcd channel_estimate() const {
    if (gpc_) return gpc_->channel().estimate;
    Eigen::VectorXcd out(0);
    for (const auto& u : ipc_->users()) {
      Eigen::VectorXcd next(out.size() + u.channel.estimate.size());
      next << out, u.channel.estimate;
      out = next;
    }
    return out;
  }

  double max_violation() const {
    if (gpc_) return gpc_->power().max_violation;
    double v = 0.0;
    for (const auto& u : ipc_->users()) v = std::max(v, u.max_violation);
    return v;
  }

 private:
  std::optional<GpcEstimator> gpc_;
  std::optional<IpcEstimator> ipc_;
};

Eigen::VectorXcd column_of_symbols(const TrialScenario& t, int i) {
  Eigen::VectorXcd b(Index(t.symbols.size()));
  for (std::size_t k = 0; k < t.symbols.size(); ++k) b(Index(k)) = t.symbols[k][std::size_t(i)];
  return b;
}

Eigen::VectorXcd true_channels(const TrialScenario& t, int hops) {
  const Index taps = t.links.dims.taps;
  Eigen::VectorXcd h(Index(t.links.users.size()) * hops * taps);
  Index pos = 0;
  for (const UserLinks& u : t.links.users)
    for (int j = 0; j < hops; ++j, pos += taps) h.segment(pos, taps) = u.to_destination[std::size_t(j)];
  return h;
}

void run_adaptive(const ExperimentConfig& cfg, Scheme scheme, double snr_db,
                  const TrialScenario& t, PacketResult& res) {
  const SystemDims& d = cfg.dims;
  const double sigma2 = noise_variance(snr_db, cfg.user_power);
  const double sigma = std::sqrt(sigma2);
  const int hops = scheme_hops(d, scheme);
  const int training = cfg.training_len;

  // Relays run ahead of the destination: their output only depends on the source->relay link.
  std::vector<Eigen::MatrixXcd> forwarded;
  std::vector<Eigen::MatrixXd> reliability;  // [relay] users x P
  if (hops > 1) {
    const Eigen::VectorXd src = source_amplitudes(cfg);
    for (int j = 0; j < d.relays; ++j) {
      const auto img = images_of(relay_design_scenario(t.links, j, src, 0.0));
      AdaptiveRelay relay(d.window(), d.users, cfg.alpha, kDefaultDelta);
      Eigen::MatrixXcd fwd(d.users, d.packet_len);
      Eigen::MatrixXd rel(d.users, d.packet_len);
      for (int i = 0; i < d.packet_len; ++i) {
        const Eigen::VectorXcd r = relay_observation(t, img, src(0), j, i, sigma);
        if (i < training) {
          const Eigen::VectorXcd pilots = column_of_symbols(t, i);
          fwd.col(i) = relay.process(r, &pilots);
        } else {
          fwd.col(i) = relay.process(r, nullptr);
        }
        rel.col(i) = relay.forwarded_reliability();
      }
      forwarded.push_back(std::move(fwd));
      reliability.push_back(std::move(rel));
    }
  }

  const auto img = images_of(design_scenario(cfg, scheme, snr_db, t));
  AdaptiveDestination dest(cfg, scheme, t, hops);
  const bool power = scheme == Scheme::JpaisGpc || scheme == Scheme::JpaisIpc;
  SymbolContext ctx;
  Eigen::VectorXcd previous = Eigen::VectorXcd::Zero(d.users);
  for (int i = 0; i < d.packet_len; ++i) {
    const Eigen::VectorXcd r = received_vector(t, img, dest.amplitudes(), forwarded, hops, i, sigma);
    const Eigen::VectorXcd y = dest.outputs(r);
    record_symbol(res, t, y, i, training);

    ctx.current = i < training ? column_of_symbols(t, i) : y.unaryExpr(&qpsk_slice);
    ctx.previous = previous;
    if (i + 1 < training) {
      ctx.next = column_of_symbols(t, i + 1);
    } else if (i + 1 < d.packet_len) {
      // One-symbol look-ahead: tentative decisions on the next interval.
      const Eigen::VectorXcd ahead =
          received_vector(t, img, dest.amplitudes(), forwarded, hops, i + 1, sigma);
      ctx.next = dest.outputs(ahead).unaryExpr(&qpsk_slice);
    } else {
      ctx.next = Eigen::VectorXcd::Zero(d.users);
    }
    dest.set_power_adaptation(power && i >= cfg.power_warmup);
    if (hops > 1) {
      // Relays report how reliable their forwarded values are.
      ctx.reliability = Eigen::MatrixXd::Ones(d.users, hops);
      for (int j = 1; j < hops; ++j) ctx.reliability.col(j) = reliability[std::size_t(j - 1)].col(i);
    }
    dest.step(r, ctx);
    previous = ctx.current;
    if (i + 1 == training) {
      const Eigen::VectorXcd truth = true_channels(t, hops);
      res.training_channel_error = (dest.channel_estimate() - truth).norm() / truth.norm();
    }
  }
  res.final_amplitudes = dest.amplitudes();
  res.max_constraint_violation = dest.max_violation();
}

std::size_t worker_count(const ExperimentConfig& cfg, std::size_t jobs) {
  std::size_t n = cfg.threads > 0 ? std::size_t(cfg.threads) : std::thread::hardware_concurrency();
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(jobs, 1));
}

/// Runs `body` for every trial index on a small worker pool; results land by index.
template <typename R>
std::vector<R> for_each_trial(const ExperimentConfig& cfg, const std::function<R(int)>& body) {
  const std::size_t n = std::size_t(cfg.trials);
  std::vector<R> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t t = next++; t < n; t = next++) {
      try {
        out[t] = body(int(t));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t workers = worker_count(cfg, n);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

double packet_ber(const PacketResult& p) {
  if (p.payload_bits == 0) return 0.0;
  return double(p.bit_errors) / double(p.payload_bits);
}

BerPoint aggregate(double x, const std::vector<double>& bers, long bits, int diverged) {
  BerPoint pt;
  pt.x = x;
  pt.bit_count = bits;
  pt.diverged = diverged;
  const double n = double(bers.size());
  if (bers.empty()) return pt;
  double sum = 0.0;
  for (double b : bers) sum += b;
  pt.ber_mean = sum / n;
  if (bers.size() > 1) {
    double ss = 0.0;
    for (double b : bers) ss += (b - pt.ber_mean) * (b - pt.ber_mean);
    pt.ber_stderr = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return pt;
}

BerPoint aggregate_packets(double x, const std::vector<PacketResult>& packets) {
  std::vector<double> bers;
  long bits = 0;
  int diverged = 0;
  for (const PacketResult& p : packets) {
    bers.push_back(packet_ber(p));
    bits += p.payload_bits;
    diverged += p.diverged ? 1 : 0;
  }
  return aggregate(x, bers, bits, diverged);
}

BerCurve empty_curve(const ExperimentConfig& cfg, const std::string& x_name, Scheme s) {
  BerCurve c;
  c.x_name = x_name;
  c.scheme = s;
  c.variant = cfg.variant;
  c.config = cfg;
  return c;
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Ncis: return "NCIS";
    case Scheme::Cis: return "CIS";
    case Scheme::JpaisGpc: return "JPAIS-GPC";
    case Scheme::JpaisIpc: return "JPAIS-IPC";
  }
  return "?";
}

std::string to_string(Variant v) { return v == Variant::Exact ? "exact" : "adaptive"; }

Scheme parse_scheme(const std::string& s) {
  std::string u;
  for (char c : s) u += char(std::toupper(static_cast<unsigned char>(c)));
  std::replace(u.begin(), u.end(), '_', '-');
  if (u == "NCIS") return Scheme::Ncis;
  if (u == "CIS") return Scheme::Cis;
  if (u == "JPAIS-GPC" || u == "GPC") return Scheme::JpaisGpc;
  if (u == "JPAIS-IPC" || u == "IPC") return Scheme::JpaisIpc;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  if (s == "exact") return Variant::Exact;
  if (s == "adaptive") return Variant::Adaptive;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

void ExperimentConfig::validate() const {
  dims.validate();
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (training_len < 0 || training_len >= dims.packet_len)
    throw std::invalid_argument("training_len must satisfy 0 <= training_len < packet_len");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(lambda_T >= 0.0)) throw std::invalid_argument("lambda_T must be >= 0");
  if (!(shadowing_std_db >= 0.0)) throw std::invalid_argument("shadowing_std_db must be >= 0");
  if (!(user_power > 0.0)) throw std::invalid_argument("user_power must be > 0");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  if (power_warmup < 0) throw std::invalid_argument("power_warmup must be >= 0");
  if (schemes.empty()) throw std::invalid_argument("schemes must not be empty");
  for (int k : user_grid)
    if (k < 1) throw std::invalid_argument("user_grid entries must be >= 1");
  mmse().validate();
}

MmseConfig ExperimentConfig::mmse() const {
  MmseConfig m;
  m.lambda_global = lambda_T;
  m.lambda_individual = lambda;
  m.max_iters = max_iters;
  m.tol = tol;
  return m;
}

double noise_variance(double snr_db, double user_power) {
  return user_power / std::pow(10.0, snr_db / 10.0);
}

TrialScenario make_trial(const SystemDims& dims, std::uint64_t seed, std::uint64_t trial,
                         double shadowing_std_db) {
  dims.validate();
  TrialScenario t;
  t.links.dims = dims;
  const int m = dims.window(), p = dims.packet_len;

  auto shadow = [&](std::uint64_t sub) {
    if (shadowing_std_db == 0.0) return 1.0;
    Rng rng = make_stream(seed, trial, Stream::Shadowing, sub);
    std::normal_distribution<double> n(0.0, shadowing_std_db);
    return std::pow(10.0, n(rng) / 20.0);
  };

  for (int k = 0; k < dims.users; ++k) {
    const std::uint64_t base = std::uint64_t(k) * kUserStride;
    UserLinks u;
    Rng code_rng = make_stream(seed, trial, Stream::Codes, std::uint64_t(k));
    u.code = SpreadingCode::random(dims.chips, code_rng);

    Rng direct = make_stream(seed, trial, Stream::DirectChannel, std::uint64_t(k));
    u.to_destination.push_back(generate_multipath_channel(dims.taps, direct) * shadow(base));
    for (int j = 0; j < dims.relays; ++j) {
      const std::uint64_t sub = base + std::uint64_t(j);
      Rng rd = make_stream(seed, trial, Stream::RelayDestChannel, sub);
      u.to_destination.push_back(generate_multipath_channel(dims.taps, rd) * shadow(sub + 1));
      Rng sr = make_stream(seed, trial, Stream::SourceRelayChannel, sub);
      u.to_relay.push_back(generate_multipath_channel(dims.taps, sr) *
                           shadow(base + kRelayOffset + std::uint64_t(j)));
    }
    t.links.users.push_back(std::move(u));

    Rng sym = make_stream(seed, trial, Stream::Symbols, std::uint64_t(k));
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<Complex> s(std::size_t(p), Complex{});
    std::vector<std::array<int, 2>> b(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
      b[std::size_t(i)] = {bit(sym), bit(sym)};
      s[std::size_t(i)] = modulate_qpsk(b[std::size_t(i)][0], b[std::size_t(i)][1]);
    }
    t.symbols.push_back(std::move(s));
    t.bits.push_back(std::move(b));

    Rng init = make_stream(seed, trial, Stream::EstimatorInit, std::uint64_t(k));
    t.estimator_init.push_back(
        complex_gaussian_vector(init, Index(dims.hops()) * dims.taps, kEstimatorInitVariance));
  }

  auto noise_matrix = [&](Stream stream, int sub) {
    Rng rng = make_stream(seed, trial, stream, std::uint64_t(sub));
    Eigen::MatrixXcd n(m, p);
    for (int i = 0; i < p; ++i)
      for (int r = 0; r < m; ++r) n(r, i) = complex_gaussian(rng);
    return n;
  };
  for (int j = 0; j < dims.hops(); ++j)
    t.destination_noise.push_back(noise_matrix(Stream::DestinationNoise, j));
  for (int j = 0; j < dims.relays; ++j)
    t.relay_noise.push_back(noise_matrix(Stream::RelayNoise, j));
  return t;
}

DesignScenario design_scenario(const ExperimentConfig& cfg, Scheme scheme, double snr_db,
                               const TrialScenario& trial) {
  const SystemDims& d = cfg.dims;
  const int hops = scheme_hops(d, scheme);
  const double sigma2 = noise_variance(snr_db, cfg.user_power);
  const double design_sigma2 = std::max(sigma2, kDesignNoiseFloor);
  const Eigen::VectorXd src = source_amplitudes(cfg);

  Eigen::MatrixXd rho = Eigen::MatrixXd::Ones(d.users, hops);
  for (int j = 1; j < hops; ++j)
    rho.col(j) =
        exact_relay(relay_design_scenario(trial.links, j - 1, src, design_sigma2), src).correlation;

  DesignScenario scn;
  scn.noise_variance = design_sigma2;
  scn.budgets = Eigen::VectorXd::Constant(d.users, cfg.user_power);
  for (int k = 0; k < d.users; ++k) {
    const UserLinks& u = trial.links.users[std::size_t(k)];
    const std::vector<ChannelVector> links(u.to_destination.begin(),
                                           u.to_destination.begin() + hops);
    DesignUser du;
    du.signature = stacked_signature(build_convolution_matrix(u.code, d.taps), links);
    du.spill_previous = spill(du.signature, d.window(), d.chips, Spill::Previous);
    du.spill_next = spill(du.signature, d.window(), d.chips, Spill::Next);
    du.relay_correlation = rho.row(k).transpose();
    scn.users.push_back(std::move(du));
  }
  return scn;
}

PacketResult run_packet(const ExperimentConfig& cfg, Scheme scheme, double snr_db,
                        const TrialScenario& trial) {
  const SystemDims& d = cfg.dims;
  PacketResult res;
  res.payload_bits = 2L * (d.packet_len - cfg.training_len) * d.users;
  res.symbol_errors.assign(std::size_t(d.packet_len), 0);
  try {
    if (cfg.variant == Variant::Exact)
      run_exact(cfg, scheme, snr_db, trial, res);
    else
      run_adaptive(cfg, scheme, snr_db, trial, res);
  } catch (const NumericalError& e) {
    // A diverged packet is scored as coin flipping on its payload.
    res.diverged = true;
    res.divergence = e.what();
    res.bit_errors = res.payload_bits / 2;
    for (int i = 0; i < d.packet_len; ++i) res.symbol_errors[std::size_t(i)] = d.users;
  }
  return res;
}

std::vector<BerCurve> run_snr_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t ns = cfg.schemes.size(), nsnr = cfg.snr_db.size();
  const auto results = for_each_trial<std::vector<PacketResult>>(cfg, [&](int t) {
    const TrialScenario trial = make_trial(cfg.dims, cfg.seed, std::uint64_t(t),
                                           cfg.shadowing_std_db);
    std::vector<PacketResult> out;
    for (Scheme s : cfg.schemes)
      for (double snr : cfg.snr_db) out.push_back(run_packet(cfg, s, snr, trial));
    return out;
  });
  std::vector<BerCurve> curves;
  for (std::size_t si = 0; si < ns; ++si) {
    BerCurve c = empty_curve(cfg, "snr_db", cfg.schemes[si]);
    for (std::size_t xi = 0; xi < nsnr; ++xi) {
      std::vector<PacketResult> packets;
      for (const auto& r : results) packets.push_back(r[si * nsnr + xi]);
      c.rows.push_back(aggregate_packets(cfg.snr_db[xi], packets));
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

BerCurve run_experiment(const ExperimentConfig& cfg, Scheme scheme) {
  ExperimentConfig one = cfg;
  one.schemes = {scheme};
  return run_snr_sweep(one).front();
}

BerCurve run_baseline_cis(const ExperimentConfig& cfg) { return run_experiment(cfg, Scheme::Cis); }

std::vector<BerCurve> run_user_sweep(const ExperimentConfig& cfg, double snr_db) {
  cfg.validate();
  std::vector<BerCurve> curves;
  for (Scheme s : cfg.schemes) curves.push_back(empty_curve(cfg, "users", s));
  for (int users : cfg.user_grid) {
    ExperimentConfig c = cfg;
    c.dims.users = users;
    const auto results = for_each_trial<std::vector<PacketResult>>(c, [&](int t) {
      const TrialScenario trial =
          make_trial(c.dims, c.seed, std::uint64_t(t), c.shadowing_std_db);
      std::vector<PacketResult> out;
      for (Scheme s : c.schemes) out.push_back(run_packet(c, s, snr_db, trial));
      return out;
    });
    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
      std::vector<PacketResult> packets;
      for (const auto& r : results) packets.push_back(r[si]);
      curves[si].rows.push_back(aggregate_packets(double(users), packets));
    }
  }
  return curves;
}

std::vector<BerCurve> run_learning_curve(const ExperimentConfig& cfg, double snr_db) {
  cfg.validate();
  const auto results = for_each_trial<std::vector<PacketResult>>(cfg, [&](int t) {
    const TrialScenario trial = make_trial(cfg.dims, cfg.seed, std::uint64_t(t),
                                           cfg.shadowing_std_db);
    std::vector<PacketResult> out;
    for (Scheme s : cfg.schemes) out.push_back(run_packet(cfg, s, snr_db, trial));
    return out;
  });
  const int p = cfg.dims.packet_len;
  const double bits_per_symbol = 2.0 * cfg.dims.users;
  std::vector<BerCurve> curves;
  for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
    BerCurve c = empty_curve(cfg, "symbol", cfg.schemes[si]);
    for (int i = 0; i < p; ++i) {
      std::vector<double> bers;
      int diverged = 0;
      for (const auto& r : results) {
        bers.push_back(r[si].symbol_errors[std::size_t(i)] / bits_per_symbol);
        diverged += r[si].diverged ? 1 : 0;
      }
      c.rows.push_back(aggregate(double(i + 1), bers, long(bits_per_symbol) * cfg.trials,
                                 diverged));
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

BerCurve run_window_ber(const ExperimentConfig& cfg, Scheme scheme, double snr_db, int first,
                        int last) {
  cfg.validate();
  if (first < 0 || last > cfg.dims.packet_len || first >= last)
    throw std::invalid_argument("run_window_ber: window outside the packet");
  const auto results = for_each_trial<PacketResult>(cfg, [&](int t) {
    const TrialScenario trial = make_trial(cfg.dims, cfg.seed, std::uint64_t(t),
                                           cfg.shadowing_std_db);
    return run_packet(cfg, scheme, snr_db, trial);
  });
  const long bits = 2L * (last - first) * cfg.dims.users;
  std::vector<double> bers;
  int diverged = 0;
  for (const PacketResult& r : results) {
    long errors = 0;
    for (int i = first; i < last; ++i) errors += r.symbol_errors[std::size_t(i)];
    bers.push_back(double(errors) / double(bits));
    diverged += r.diverged ? 1 : 0;
  }
  BerCurve c = empty_curve(cfg, "snr_db", scheme);
  c.rows.push_back(aggregate(snr_db, bers, bits * cfg.trials, diverged));
  return c;
}

std::map<Scheme, std::optional<int>> capacity_at_target(const std::vector<BerCurve>& curves,
                                                        double target_ber) {
  std::map<Scheme, std::optional<int>> out;
  for (const BerCurve& c : curves) {
    std::optional<int> best;
    for (const BerPoint& pt : c.rows)
      if (pt.ber_mean <= target_ber && (!best || int(pt.x) > *best)) best = int(pt.x);
    out[c.scheme] = best;
  }
  return out;
}

}  // namespace coopcdma
