#pragma once

// Trial orchestration. Every random draw is keyed by (master seed, trial,
// purpose, ...) so a trial's results do not depend on scheduling, thread
// count or which other trials ran.

#include "dmrs_sssad/baselines.hpp"
#include "dmrs_sssad/cdl_channel.hpp"
#include "dmrs_sssad/harness/config.hpp"
#include "dmrs_sssad/phy_link.hpp"
#include "dmrs_sssad/sparsity_extractor.hpp"
#include "dmrs_sssad/sssad_detector.hpp"
#include "dmrs_sssad/zc_dmrs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace dmrs::harness {

struct TrialFailureError : Error {
  using Error::Error;
};

enum Purpose : std::uint64_t {
  kPlacement = 1,
  kUserChannel = 2,
  kAttackerChannel = 3,
  kImpairment = 4,
  kProbes = 5,
  kNoise = 6,
  kAttackPhase = 7,
};

/// Run fn(i) for i in [0, n) on `threads` workers (0 = hardware concurrency).
/// The first exception escaping fn is rethrown after all workers stop.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int width = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  width = std::min(width, n);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(width));
    for (int t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Shared, read-only inputs of a run.
struct RunInputs {
  ScenarioConfig cfg;
  ClusterTable table;
  PreamblePool pool;
  TapGrid grid;
  ArraySpec array;

  explicit RunInputs(ScenarioConfig c) : cfg(std::move(c)) {
    cfg.validate();
    table = resolve_cluster_table(cfg);
    std::vector<ZcSequence> bases;
    for (int r : cfg.link.roots) bases.push_back(generate_zc(cfg.link.sequence_length, r));
    pool = build_pool(bases, cfg.link.shift_size, cfg.link.users);
    assign_users(pool, cfg.link.users);
    grid = TapGrid{cfg.link.taps, 1.0 / (cfg.link.sequence_length * cfg.link.subcarrier_spacing_hz)};
    array = ArraySpec{cfg.channel.antennas, cfg.channel.spacing_wavelengths};
    require_shift_clears_delay_spread(pool, cfg.link.taps);
  }
};

/// One trial's geometry, channels and receive chain.
class TrialContext {
 public:
  TrialContext(const RunInputs& in, int trial) : in_(in), trial_(trial) {
    const auto& cfg = in.cfg;
    const std::uint64_t seed = cfg.seed;
    const auto t = static_cast<std::uint64_t>(trial);
    positions_ = place_actors(cfg.channel.inner_radius_m, cfg.channel.outer_radius_m, cfg.link.users + 1,
                              derive_seed(seed, t, kPlacement));
    std::vector<ChannelRealization> users;
    users.reserve(static_cast<std::size_t>(cfg.link.users));
    for (int k = 0; k < cfg.link.users; ++k) {
      users.push_back(draw_channel_at(in.array, in.table, in.grid, positions_[static_cast<std::size_t>(k)].azimuth_deg,
                                      SourceId::user(k), derive_seed(seed, t, kUserChannel, k),
                                      cfg.channel.rays_per_cluster));
    }
    attacker_azimuth_ = positions_.back().azimuth_deg;
    auto attacker = draw_channel_at(in.array, in.table, in.grid, attacker_azimuth_, SourceId::attacker(),
                                    derive_seed(seed, t, kAttackerChannel), cfg.channel.rays_per_cluster);
    LinkConfig lc;
    lc.subcarriers = cfg.link.sequence_length;
    lc.samples = cfg.samples();
    lc.user_powers.assign(static_cast<std::size_t>(cfg.link.users), cfg.pilot_energy());
    lc.noise_variance = cfg.noise_variance();
    lc.victim = cfg.link.victim;
    victim_azimuth_ = positions_[static_cast<std::size_t>(cfg.link.victim)].azimuth_deg;
    sim_.emplace(in.pool, std::move(users), std::move(attacker), lc, cfg.rho());
    if (cfg.probes.refresh == ProbeRefresh::PerLink) bank_ = make_probes(derive_seed(seed, t, kProbes));
  }

  int trial() const { return trial_; }
  double victim_azimuth_deg() const { return victim_azimuth_; }
  double attacker_azimuth_deg() const { return attacker_azimuth_; }
  const LinkSimulator& simulator() const { return *sim_; }

  SubframePlan plan(int subframe) const {
    const auto& cfg = in_.cfg;
    const auto t = static_cast<std::uint64_t>(trial_);
    const auto s = static_cast<std::uint64_t>(subframe);
    Rng rng(derive_seed(cfg.seed, t, kImpairment, s));
    const double spread = cfg.impairments.power_fluctuation_db;
    SubframePlan p;
    p.subframe = subframe;
    p.samples = cfg.samples();
    p.victim_gain = std::pow(10.0, spread * rng.normal() / 20.0);
    p.attacker_gain = std::pow(10.0, spread * rng.normal() / 20.0);
    p.attack_phase_rad = rng.uniform(0.0, 2.0 * kPi);
    p.attack_phase_jitter_rad = cfg.impairments.attack_phase_jitter_rad;
    p.noise_seed = derive_seed(cfg.seed, t, kNoise, s);
    p.phase_seed = derive_seed(cfg.seed, t, kAttackPhase, s);
    return p;
  }

  SubframePair simulate(int subframe, bool with_attack) const { return sim_->simulate(plan(subframe), with_attack); }

  ComplexMat probes_for(int subframe) const {
    if (bank_) return *bank_;
    return make_probes(derive_seed(in_.cfg.seed, static_cast<std::uint64_t>(trial_), kProbes,
                                   static_cast<std::uint64_t>(subframe)));
  }

  SensingBatch batch(const StackedEstimate& est) const { return make_sensing_batch(est, probes_for(est.subframe)); }

  SparsityFingerprint fingerprint(const StackedEstimate& est) const {
    return extract(batch(est), in_.cfg.extractor, est.subframe);
  }

 private:
  ComplexMat make_probes(std::uint64_t seed) const {
    const auto& cfg = in_.cfg;
    if (cfg.probes.kind == ProbeKind::Clustered) {
      return clustered_probes(in_.array, in_.table, in_.grid, cfg.samples(), seed);
    }
    return gaussian_probes(cfg.dimension(), cfg.samples(), seed);
  }

  const RunInputs& in_;
  int trial_;
  std::vector<PolarPosition> positions_;
  double victim_azimuth_ = 0.0;
  double attacker_azimuth_ = 0.0;
  std::optional<LinkSimulator> sim_;
  std::optional<ComplexMat> bank_;
};

/// Statistics of one trial: subframe 0 is an attack-free reference, subframe 1
/// is observed with and without the attacker under common random numbers.
struct TrialOutcome {
  int trial = 0;
  bool ok = false;
  std::string error;
  double victim_azimuth_deg = 0.0;
  double attacker_azimuth_deg = 0.0;
  double c_absent = 0.0;
  double c_present = 0.0;
  double ed_absent = 0.0;
  double ed_present = 0.0;
  int sd_absent = 0;
  int sd_present = 0;
  int support_reference = 0;
  int support_absent = 0;
  int support_present = 0;
  bool has_present = false;
};

inline TrialOutcome run_single_trial(const RunInputs& in, int trial, bool with_attack) {
  TrialOutcome out;
  out.trial = trial;
  try {
    const TrialContext ctx(in, trial);
    out.victim_azimuth_deg = ctx.victim_azimuth_deg();
    out.attacker_azimuth_deg = ctx.attacker_azimuth_deg();
    const auto ref = ctx.simulate(0, false);
    const auto pair = ctx.simulate(1, with_attack);
    const auto f_ref = ctx.fingerprint(ref.absent);
    const auto f_abs = ctx.fingerprint(pair.absent);
    out.c_absent = similarity(f_ref, f_abs);
    out.support_reference = static_cast<int>(f_ref.support.size());
    out.support_absent = static_cast<int>(f_abs.support.size());
    out.ed_absent = ed_statistic(observe_subframe(pair.absent));
    out.sd_absent = sd_statistic(pair.absent, in.cfg.sd);
    if (pair.present) {
      const auto f_pre = ctx.fingerprint(*pair.present);
      out.c_present = similarity(f_ref, f_pre);
      out.support_present = static_cast<int>(f_pre.support.size());
      out.ed_present = ed_statistic(observe_subframe(*pair.present));
      out.sd_present = sd_statistic(*pair.present, in.cfg.sd);
      out.has_present = true;
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = "trial " + std::to_string(trial) + ": " + e.what();
  }
  return out;
}

inline void check_failures(int failed, int total, double tolerance, const std::string& first_error) {
  if (total > 0 && static_cast<double>(failed) > tolerance * total) {
    throw TrialFailureError(std::to_string(failed) + " of " + std::to_string(total) +
                            " trials failed (tolerance " + std::to_string(tolerance) + "); first: " + first_error);
  }
}

template <class Outcome>
void check_outcomes(const std::vector<Outcome>& outcomes, double tolerance) {
  int failed = 0;
  std::string first;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      if (first.empty()) first = o.error;
      ++failed;
    }
  }
  check_failures(failed, static_cast<int>(outcomes.size()), tolerance, first);
}

/// All trials, ordered by trial index. Failed trials are recorded with their
/// error; a failure fraction beyond the configured tolerance throws.
inline std::vector<TrialOutcome> run_trials(const RunInputs& in, bool with_attack = true) {
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(in.cfg.trials));
  parallel_for(in.cfg.trials, in.cfg.threads, [&](int i) {
    outcomes[static_cast<std::size_t>(i)] = run_single_trial(in, i, with_attack);
  });
  check_outcomes(outcomes, in.cfg.failure_tolerance);
  return outcomes;
}

inline std::vector<TrialOutcome> run_trials(const ScenarioConfig& cfg, bool with_attack = true) {
  const RunInputs in(cfg);
  return run_trials(in, with_attack);
}

// ---------------------------------------------------------------------------
// Calibration: attack-free consecutive-subframe similarities.

struct Calibration {
  std::vector<double> similarities;  // ascending

  double fraction_above(double eta) const {
    if (similarities.empty()) return 0.0;
    const auto it = std::upper_bound(similarities.begin(), similarities.end(), eta);
    return static_cast<double>(similarities.end() - it) / static_cast<double>(similarities.size());
  }

  /// Empirical CDF F(c) = fraction of similarities <= c.
  double cdf(double c) const { return similarities.empty() ? 0.0 : 1.0 - fraction_above(c); }

  /// Largest eta whose empirical false-alarm rate, fraction of c < eta, does
  /// not exceed `target_pfa`.
  double suggested_eta(double target_pfa) const {
    if (similarities.empty()) throw InsufficientDataError("calibration: no similarities");
    if (!(target_pfa >= 0.0 && target_pfa < 1.0)) throw ParameterError("calibration: target must lie in [0, 1)");
    const auto n = similarities.size();
    const auto k = static_cast<std::size_t>(std::floor(target_pfa * static_cast<double>(n)));
    return similarities[std::min(k, n - 1)];
  }
};

inline Calibration calibrate(const std::vector<TrialOutcome>& outcomes) {
  Calibration cal;
  for (const auto& o : outcomes) {
    if (o.ok) cal.similarities.push_back(o.c_absent);
  }
  if (cal.similarities.empty()) throw InsufficientDataError("calibration: every trial failed");
  std::sort(cal.similarities.begin(), cal.similarities.end());
  return cal;
}

// ---------------------------------------------------------------------------
// Change-point streams: attack-free until the onset subframe, attacked after.

struct StreamOutcome {
  int trial = 0;
  bool ok = false;
  std::string error;
  std::optional<int> first_alarm;
  int pre_onset_alarms = 0;
  int pre_onset_comparisons = 0;
  std::vector<double> similarities;
};

inline StreamOutcome run_single_stream(const RunInputs& in, int trial) {
  StreamOutcome out;
  out.trial = trial;
  const auto& cp = in.cfg.change_point;
  try {
    const TrialContext ctx(in, trial);
    std::vector<SparsityFingerprint> stream;
    stream.reserve(static_cast<std::size_t>(cp.stream_length));
    for (int t = 0; t < cp.stream_length; ++t) {
      const bool attacked = t >= cp.onset;
      const auto pair = ctx.simulate(t, attacked);
      stream.push_back(ctx.fingerprint(attacked ? *pair.present : pair.absent));
    }
    const auto result = run_stream(stream, in.cfg.eta, in.cfg.policy);
    out.first_alarm = result.first_alarm;
    for (const auto& o : result.outcomes) {
      out.similarities.push_back(o.similarity);
      if (o.subframe < cp.onset) {
        ++out.pre_onset_comparisons;
        if (o.decision == Decision::SpoofingAlarm) ++out.pre_onset_alarms;
      }
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = "stream " + std::to_string(trial) + ": " + e.what();
  }
  return out;
}

inline std::vector<StreamOutcome> run_streams(const RunInputs& in) {
  std::vector<StreamOutcome> outcomes(static_cast<std::size_t>(in.cfg.trials));
  parallel_for(in.cfg.trials, in.cfg.threads,
               [&](int i) { outcomes[static_cast<std::size_t>(i)] = run_single_stream(in, i); });
  check_outcomes(outcomes, in.cfg.failure_tolerance);
  return outcomes;
}

struct LatencySummary {
  int streams = 0;
  int onset = 0;
  double median_first_alarm = 0.0;  // streams without an alarm count as stream_length
  double pre_onset_alarm_rate = 0.0;
  int streams_without_alarm = 0;
};

inline LatencySummary summarize_latency(const std::vector<StreamOutcome>& outcomes, const ChangePointSection& cp) {
  LatencySummary s;
  s.onset = cp.onset;
  std::vector<double> first;
  long alarms = 0, comparisons = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    ++s.streams;
    if (!o.first_alarm) ++s.streams_without_alarm;
    first.push_back(o.first_alarm ? *o.first_alarm : cp.stream_length);
    alarms += o.pre_onset_alarms;
    comparisons += o.pre_onset_comparisons;
  }
  if (first.empty()) throw InsufficientDataError("latency: every stream failed");
  std::sort(first.begin(), first.end());
  const std::size_t n = first.size();
  s.median_first_alarm = n % 2 ? first[n / 2] : 0.5 * (first[n / 2 - 1] + first[n / 2]);
  s.pre_onset_alarm_rate = comparisons ? static_cast<double>(alarms) / static_cast<double>(comparisons) : 0.0;
  return s;
}

}  // namespace dmrs::harness
