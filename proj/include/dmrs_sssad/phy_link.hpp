#pragma once

// Uplink DMRS link: circular-convolution receive model, unitary FFT,
// per-subcarrier least-squares estimation and projection onto the
// delay-spread window.
//
// Conventions:
//   * pilots are unit-norm sequences, so P_k is the pilot energy of user k;
//   * y_m = sum_k sqrt(P_k) p_k (*) h_{k,m} + sqrt(P_A) p_v (*) g_m + w_m,
//     w_m ~ CN(0, sigma^2 I);
//   * the frequency-domain LS estimate is scaled like sqrt(N) F [h; 0], and
//     its projection back onto the first tau taps recovers h itself;
//   * stacked vectors are antenna-major: index m * tau + t.

#include "dmrs_sssad/cdl_channel.hpp"
#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/zc_dmrs.hpp"

#include <unsupported/Eigen/FFT>

#include <optional>
#include <vector>

namespace dmrs {

struct LinkConfig {
  int subcarriers = 139;           // N_s, equal to the pilot length
  int samples = 192;               // L, LS estimates per subframe
  std::vector<double> user_powers; // P_k, linear pilot energy
  double noise_variance = 0.0;     // sigma^2 per time-domain sample
  int victim = 0;                  // 0-based index of the monitored user

  double victim_power() const { return user_powers.at(static_cast<std::size_t>(victim)); }

  void validate(int taps) const {
    if (subcarriers < taps) throw ConfigError("link: subcarriers must cover the delay spread");
    if (samples < 1) throw ConfigError("link: need at least one sample per subframe");
    if (user_powers.empty()) throw ConfigError("link: no active users");
    for (double p : user_powers) {
      if (!(p > 0.0)) throw ConfigError("link: user powers must be positive");
    }
    if (!(noise_variance >= 0.0)) throw ConfigError("link: noise variance must be non-negative");
    if (victim < 0 || static_cast<std::size_t>(victim) >= user_powers.size()) {
      throw ConfigError("link: victim index out of range");
    }
  }
};

struct AttackProfile {
  bool active = false;
  double rho = 0.0;          // sqrt(P_A / P_victim)
  ComplexMat channel;        // attacker taps g, tau x M
  double phase_rad = 0.0;    // attacker phase relative to the victim

  cplx amplitude_factor() const { return active ? std::polar(rho, phase_rad) : cplx{0.0, 0.0}; }
};

/// One antenna per column, N_s rows.
using TdReceive = ComplexMat;
using FdReceive = ComplexMat;

/// Circular convolution of a pilot with one antenna's taps.
inline ComplexVec circular_convolve(const ComplexVec& pilot, const Eigen::Ref<const ComplexVec>& taps) {
  const Eigen::Index n = pilot.size();
  ComplexVec out = ComplexVec::Zero(n);
  for (Eigen::Index t = 0; t < taps.size(); ++t) {
    if (taps(t) == cplx{0.0, 0.0}) continue;
    for (Eigen::Index i = 0; i < n; ++i) out(i) += taps(t) * pilot(((i - t) % n + n) % n);
  }
  return out;
}

/// Noise-free contribution sqrt(power) * (pilot (*) h_m) for every antenna.
inline TdReceive convolve_channel(const ComplexVec& pilot, const ChannelRealization& ch, cplx amplitude) {
  TdReceive y(pilot.size(), ch.antennas());
  for (int m = 0; m < ch.antennas(); ++m) y.col(m) = amplitude * circular_convolve(pilot, ch.taps.col(m));
  return y;
}

/// Time-domain receive for one DMRS occasion. Noise is drawn from `rng` as an
/// N_s x M block in column-major order.
inline TdReceive transmit_receive_td(const PreamblePool& pool, const std::vector<ChannelRealization>& channels,
                                     const AttackProfile& attack, const LinkConfig& cfg, Rng& rng) {
  if (channels.empty()) throw ConfigError("transmit_receive_td: no channels");
  const int taps = channels.front().tap_count();
  const int antennas = channels.front().antennas();
  if (taps > pool.sequence_length) {
    throw ConfigError("transmit_receive_td: delay spread exceeds the pilot length");
  }
  if (cfg.subcarriers != pool.sequence_length) {
    throw ConfigError("transmit_receive_td: subcarrier count must equal the pilot length");
  }
  if (channels.size() != cfg.user_powers.size()) {
    throw ConfigError("transmit_receive_td: one channel per user required");
  }
  TdReceive y = TdReceive::Zero(cfg.subcarriers, antennas);
  for (std::size_t k = 0; k < channels.size(); ++k) {
    if (channels[k].tap_count() != taps || channels[k].antennas() != antennas) {
      throw ShapeError("transmit_receive_td: channel shapes differ between users");
    }
    y += convolve_channel(pool.sequence_for_user(static_cast<int>(k)), channels[k],
                          std::sqrt(cfg.user_powers[k]));
  }
  if (attack.active) {
    if (attack.channel.rows() != taps || attack.channel.cols() != antennas) {
      throw ShapeError("transmit_receive_td: attacker channel shape mismatch");
    }
    ChannelRealization g;
    g.taps = attack.channel;
    // The attacker replays the victim's sequence.
    y += convolve_channel(pool.sequence_for_user(cfg.victim), g,
                          std::sqrt(cfg.victim_power()) * attack.amplitude_factor());
  }
  if (cfg.noise_variance > 0.0) {
    ComplexMat w(cfg.subcarriers, antennas);
    rng.fill_complex_normal(w, cfg.noise_variance);
    y += w;
  }
  return y;
}

namespace detail {
inline ComplexVec unitary_fft(const ComplexVec& x) {
  Eigen::FFT<double> fft;
  ComplexVec out(x.size());
  fft.fwd(out, x);
  return out / std::sqrt(static_cast<double>(x.size()));
}

inline ComplexVec unitary_ifft(const ComplexVec& x) {
  Eigen::FFT<double> fft;
  ComplexVec out(x.size());
  fft.inv(out, x);
  return out * std::sqrt(static_cast<double>(x.size()));
}
}  // namespace detail

/// Column-wise unitary DFT.
inline FdReceive to_frequency_domain(const TdReceive& y, int subcarriers) {
  if (y.rows() != subcarriers) {
    throw ShapeError("to_frequency_domain: got " + std::to_string(y.rows()) + " samples, expected " +
                     std::to_string(subcarriers));
  }
  FdReceive out(y.rows(), y.cols());
  for (Eigen::Index m = 0; m < y.cols(); ++m) out.col(m) = detail::unitary_fft(y.col(m));
  return out;
}

/// LS estimate of one DMRS occasion.
struct LsEstimate {
  ComplexVec full;  // N_s * M, antenna-major, scaled like sqrt(N) F [h; 0]
  ComplexVec taps;  // tau * M, antenna-major
};

inline LsEstimate ls_estimate(const FdReceive& y_fd, const ComplexVec& pilot, double pilot_power, int taps) {
  const Eigen::Index n = y_fd.rows();
  const Eigen::Index antennas = y_fd.cols();
  if (pilot.size() != n) throw ShapeError("ls_estimate: pilot length differs from subcarrier count");
  if (taps < 1 || taps > n) throw ShapeError("ls_estimate: invalid tap window");
  if (!(pilot_power > 0.0)) throw ParameterError("ls_estimate: pilot power must be positive");
  const ComplexVec pilot_fd = detail::unitary_fft(pilot);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(pilot_fd(i)) < 1e-12) throw DegenerateInputError("ls_estimate: pilot has a zero subcarrier");
  }
  const double amp = std::sqrt(pilot_power);
  const double root_n = std::sqrt(static_cast<double>(n));
  LsEstimate est{ComplexVec(n * antennas), ComplexVec(taps * antennas)};
  for (Eigen::Index m = 0; m < antennas; ++m) {
    ComplexVec h = y_fd.col(m).array() / (amp * pilot_fd.array());
    est.full.segment(m * n, n) = h;
    // F_bar^H h / N with F_bar = sqrt(N) F(:, 1:tau).
    est.taps.segment(m * taps, taps) = detail::unitary_ifft(h).head(taps) / root_n;
  }
  return est;
}

/// Stacked frequency response [sqrt(N) F [h_m; 0]]_m, antenna-major.
inline ComplexVec stacked_frequency_channel(const ComplexMat& taps, int subcarriers) {
  const Eigen::Index t = taps.rows();
  const Eigen::Index antennas = taps.cols();
  ComplexVec out(subcarriers * antennas);
  const double root_n = std::sqrt(static_cast<double>(subcarriers));
  for (Eigen::Index m = 0; m < antennas; ++m) {
    ComplexVec padded = ComplexVec::Zero(subcarriers);
    padded.head(t) = taps.col(m);
    out.segment(m * subcarriers, subcarriers) = root_n * detail::unitary_fft(padded);
  }
  return out;
}

/// Antenna-major tap vector (index m * tau + t) of a tau x M tap matrix.
inline ComplexVec stack_taps(const ComplexMat& taps) {
  return Eigen::Map<const ComplexVec>(taps.data(), taps.size());
}

struct StackedEstimate {
  int subframe = 0;
  int taps = 0;
  int antennas = 0;
  ComplexMat samples;                // (tau * M) x L, one LS estimate per column
  std::optional<ComplexMat> full;    // (N_s * M) x L when requested

  int dimension() const { return taps * antennas; }
  int sample_count() const { return static_cast<int>(samples.cols()); }
};

struct SubframeObservation {
  int subframe = 0;
  RealVec energy;            // s(l) = ||h_hat(l)||^2
  StackedEstimate estimate;  // the estimates s was computed from
};

inline SubframeObservation observe_subframe(StackedEstimate estimates) {
  if (estimates.sample_count() < 1) throw ParameterError("observe_subframe: no samples");
  SubframeObservation obs;
  obs.subframe = estimates.subframe;
  obs.energy = estimates.samples.colwise().squaredNorm().transpose();
  obs.estimate = std::move(estimates);
  return obs;
}

/// Per-subframe simulation controls for LinkSimulator.
struct SubframePlan {
  int subframe = 0;
  int samples = 1;
  double victim_gain = 1.0;     // amplitude scaling of the victim this subframe
  double attacker_gain = 1.0;   // amplitude scaling of the attacker this subframe
  double attack_phase_rad = 0.0;
  double attack_phase_jitter_rad = 0.0;  // per-occasion Gaussian phase jitter
  std::uint64_t noise_seed = 0;
  std::uint64_t phase_seed = 0;
  bool keep_full = false;
};

struct SubframePair {
  StackedEstimate absent;
  std::optional<StackedEstimate> present;
};

/// Receive chain composed into one linear map per antenna. The map is built by
/// pushing unit impulses through to_frequency_domain and ls_estimate, so it
/// is exactly the stepwise chain evaluated on the basis.
class LinkSimulator {
 public:
  LinkSimulator(const PreamblePool& pool, std::vector<ChannelRealization> users,
                std::optional<ChannelRealization> attacker, LinkConfig cfg, double rho)
      : users_(std::move(users)), attacker_(std::move(attacker)), cfg_(std::move(cfg)), rho_(rho) {
    if (users_.empty()) throw ConfigError("LinkSimulator: no users");
    taps_ = users_.front().tap_count();
    antennas_ = users_.front().antennas();
    cfg_.validate(taps_);
    if (cfg_.subcarriers != pool.sequence_length) {
      throw ConfigError("LinkSimulator: subcarrier count must equal the pilot length");
    }
    if (taps_ > pool.sequence_length) throw ConfigError("LinkSimulator: delay spread exceeds pilot length");
    if (rho_ < 0.0) throw ConfigError("LinkSimulator: rho must be non-negative");
    const int n = cfg_.subcarriers;
    const ComplexVec& pilot = pool.sequence_for_user(cfg_.victim);
    estimator_.resize(taps_, n);
    full_estimator_.resize(n, n);
    for (int i = 0; i < n; ++i) {
      FdReceive e = FdReceive::Zero(n, 1);
      e(i, 0) = 1.0;
      const LsEstimate col = ls_estimate(to_frequency_domain(e, n), pilot, cfg_.victim_power(), taps_);
      estimator_.col(i) = col.taps;
      full_estimator_.col(i) = col.full;
    }
    // Noise-free contributions, already mapped through the estimator.
    victim_est_ = ComplexMat::Zero(taps_, antennas_);
    others_est_ = ComplexMat::Zero(taps_, antennas_);
    for (std::size_t k = 0; k < users_.size(); ++k) {
      const TdReceive y = convolve_channel(pool.sequence_for_user(static_cast<int>(k)), users_[k],
                                           std::sqrt(cfg_.user_powers[k]));
      if (static_cast<int>(k) == cfg_.victim) {
        victim_td_ = y;
        victim_est_ += estimator_ * y;
      } else {
        others_est_ += estimator_ * y;
        others_td_ = others_td_.size() ? ComplexMat(others_td_ + y) : y;
      }
    }
    if (attacker_) {
      attacker_td_ = convolve_channel(pilot, *attacker_, std::sqrt(cfg_.victim_power()) * rho_);
      attacker_est_ = estimator_ * attacker_td_;
    }
  }

  int taps() const { return taps_; }
  int antennas() const { return antennas_; }
  int dimension() const { return taps_ * antennas_; }
  const ComplexMat& estimator() const { return estimator_; }
  const LinkConfig& config() const { return cfg_; }

  /// Simulate the attack-absent subframe and, when an attacker exists and
  /// `with_attack` is set, the paired attack-present subframe sharing the
  /// same noise.
  SubframePair simulate(const SubframePlan& plan, bool with_attack) const {
    if (plan.samples < 1) throw ParameterError("simulate: need at least one sample");
    if (with_attack && !attacker_) throw ConfigError("simulate: no attacker channel configured");
    const int n = cfg_.subcarriers;
    const int dim = dimension();
    Rng noise_rng(plan.noise_seed);
    Rng phase_rng(plan.phase_seed);
    SubframePair out;
    out.absent = empty_estimate(plan);
    if (with_attack) out.present = empty_estimate(plan);
    const ComplexMat signal = plan.victim_gain * victim_est_ + others_est_;
    ComplexMat w(n, antennas_);
    ComplexMat est(taps_, antennas_);
    ComplexMat full_noise;
    for (int l = 0; l < plan.samples; ++l) {
      est = signal;
      if (cfg_.noise_variance > 0.0) {
        noise_rng.fill_complex_normal(w, cfg_.noise_variance);
        est.noalias() += estimator_ * w;
      }
      out.absent.samples.col(l) = Eigen::Map<const ComplexVec>(est.data(), dim);
      if (plan.keep_full) {
        ComplexMat y = plan.victim_gain * victim_td_;
        if (others_td_.size()) y += others_td_;
        if (cfg_.noise_variance > 0.0) y += w;
        const ComplexMat f = full_estimator_ * y;
        out.absent.full->col(l) = Eigen::Map<const ComplexVec>(f.data(), f.size());
      }
      if (with_attack) {
        const double jitter = plan.attack_phase_jitter_rad * phase_rng.normal();
        const cplx a = plan.attacker_gain * std::polar(1.0, plan.attack_phase_rad + jitter);
        const ComplexMat att = a * attacker_est_;
        out.present->samples.col(l) =
            out.absent.samples.col(l) + Eigen::Map<const ComplexVec>(att.data(), dim);
        if (plan.keep_full) {
          const ComplexMat f = full_estimator_ * (a * attacker_td_);
          out.present->full->col(l) = out.absent.full->col(l) + Eigen::Map<const ComplexVec>(f.data(), f.size());
        }
      }
    }
    return out;
  }

 private:
  StackedEstimate empty_estimate(const SubframePlan& plan) const {
    StackedEstimate e;
    e.subframe = plan.subframe;
    e.taps = taps_;
    e.antennas = antennas_;
    e.samples.resize(dimension(), plan.samples);
    if (plan.keep_full) e.full = ComplexMat(cfg_.subcarriers * antennas_, plan.samples);
    return e;
  }

  std::vector<ChannelRealization> users_;
  std::optional<ChannelRealization> attacker_;
  LinkConfig cfg_;
  double rho_ = 0.0;
  int taps_ = 0;
  int antennas_ = 0;
  ComplexMat estimator_;       // tau x N_s
  ComplexMat full_estimator_;  // N_s x N_s
  ComplexMat victim_est_, others_est_, attacker_est_;
  ComplexMat victim_td_, others_td_, attacker_td_;
};

}  // namespace dmrs
