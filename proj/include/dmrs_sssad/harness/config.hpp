#pragma once

// Scenario configuration for Monte Carlo runs. One nested JSON document holds
// every module's settings; CLI flags override individual fields afterwards.

#include "dmrs_sssad/baselines.hpp"
#include "dmrs_sssad/cdl_channel.hpp"
#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/sparsity_extractor.hpp"
#include "dmrs_sssad/sssad_detector.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace dmrs::harness {

using nlohmann::json;

enum class NoiseConvention {
  Conventional,  // LS noise per element sigma^2 / (N_RS * P_U)
  AsPrinted,     // LS noise per element sigma^2 / (N_RS * sqrt(P_U))
};

enum class ProbeRefresh {
  PerLink,      // one probe bank per link, reused every subframe
  PerSubframe,  // fresh probes every subframe
};

struct LinkSection {
  int sequence_length = 139;
  std::vector<int> roots{1};
  int shift_size = 8;
  int users = 16;
  int victim = 0;
  int taps = 4;
  double subcarrier_spacing_hz = 30e3;
  int samples_per_rb = 12;
  double user_power = 1.0;  // P_U, linear
  NoiseConvention noise_convention = NoiseConvention::Conventional;
};

struct ChannelSection {
  int antennas = 64;
  double spacing_wavelengths = 0.5;
  double inner_radius_m = 100.0;
  double outer_radius_m = 120.0;
  std::string cluster_table;  // path; empty selects the built-in table
  int rays_per_cluster = 20;
};

struct ImpairmentSection {
  double power_fluctuation_db = 3.0;      // per-subframe log-normal std, victim and attacker
  double attack_phase_jitter_rad = 0.035;  // per-occasion attacker phase noise std
};

struct ProbeSection {
  ProbeKind kind = ProbeKind::Gaussian;
  ProbeRefresh refresh = ProbeRefresh::PerLink;
};

struct ChangePointSection {
  int stream_length = 10;
  int onset = 5;  // first attacked subframe t*
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int trials = 500;
  double snr_db = 5.0;
  double jsr_db = 0.0;
  int rb = 16;
  int threads = 0;                 // 0 selects the hardware concurrency
  double failure_tolerance = 0.01;  // fraction of trials allowed to fail
  std::string out_dir = "results";

  LinkSection link;
  ChannelSection channel;
  ImpairmentSection impairments;
  ProbeSection probes;
  ExtractorConfig extractor;
  double eta = kDefaultEta;
  ReferencePolicy policy = ReferencePolicy::Quarantine;
  SdConfig sd;
  ChangePointSection change_point;

  int samples() const { return rb * link.samples_per_rb; }
  int dimension() const { return channel.antennas * link.taps; }
  double snr_linear() const { return db_to_linear(snr_db); }
  double rho() const { return std::sqrt(db_to_linear(jsr_db)); }
  double pilot_energy() const { return link.sequence_length * link.user_power; }

  /// Time-domain noise variance sigma^2 realizing the configured SNR P_U / sigma^2.
  double noise_variance() const {
    const double sigma2 = link.user_power / snr_linear();
    return link.noise_convention == NoiseConvention::AsPrinted ? sigma2 * std::sqrt(link.user_power) : sigma2;
  }

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (!std::isfinite(snr_db) || !std::isfinite(jsr_db)) throw ConfigError("snr_db and jsr_db must be finite");
    if (rb < 1) throw ConfigError("rb must be >= 1");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (!(failure_tolerance >= 0.0 && failure_tolerance <= 1.0)) throw ConfigError("failure_tolerance must lie in [0, 1]");
    if (link.samples_per_rb < 1) throw ConfigError("link.samples_per_rb must be >= 1");
    if (link.users < 1) throw ConfigError("link.users must be >= 1");
    if (link.victim < 0 || link.victim >= link.users) throw ConfigError("link.victim out of range");
    if (link.taps < 1) throw ConfigError("link.taps must be >= 1");
    if (link.roots.empty()) throw ConfigError("link.roots must not be empty");
    if (!(link.user_power > 0.0)) throw ConfigError("link.user_power must be positive");
    if (!(link.subcarrier_spacing_hz > 0.0)) throw ConfigError("link.subcarrier_spacing_hz must be positive");
    if (channel.antennas < 1) throw ConfigError("channel.antennas must be >= 1");
    if (!(channel.inner_radius_m > 0.0 && channel.inner_radius_m < channel.outer_radius_m)) {
      throw ConfigError("channel radii must satisfy 0 < inner < outer");
    }
    if (channel.rays_per_cluster < 1) throw ConfigError("channel.rays_per_cluster must be >= 1");
    if (impairments.power_fluctuation_db < 0.0 || impairments.attack_phase_jitter_rad < 0.0) {
      throw ConfigError("impairment spreads must be non-negative");
    }
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("detector.eta must lie in [0, 1]");
    if (change_point.stream_length < 2) throw ConfigError("change_point.stream_length must be >= 2");
    if (change_point.onset < 1 || change_point.onset >= change_point.stream_length) {
      throw ConfigError("change_point.onset must lie in [1, stream_length)");
    }
    extractor.validate();
    sd.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON mapping. Enumerations travel as lower-case strings.

namespace detail {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline const EnumName<NoiseConvention> kNoiseNames[] = {{NoiseConvention::Conventional, "conventional"},
                                                        {NoiseConvention::AsPrinted, "as_printed"}};
inline const EnumName<ProbeRefresh> kRefreshNames[] = {{ProbeRefresh::PerLink, "per_link"},
                                                       {ProbeRefresh::PerSubframe, "per_subframe"}};
inline const EnumName<ProbeKind> kProbeNames[] = {{ProbeKind::Gaussian, "gaussian"},
                                                  {ProbeKind::Clustered, "clustered"}};
inline const EnumName<GradientMode> kGradientNames[] = {{GradientMode::Analytic, "analytic"},
                                                        {GradientMode::AsPrinted, "as_printed"}};
inline const EnumName<ReferencePolicy> kPolicyNames[] = {{ReferencePolicy::Quarantine, "quarantine"},
                                                         {ReferencePolicy::AlwaysUpdate, "always_update"}};
inline const EnumName<SdRule> kSdNames[] = {{SdRule::MarchenkoPastur, "marchenko_pastur"},
                                            {SdRule::MedianMultiple, "median_multiple"}};

template <class E, std::size_t N>
std::string enum_to(const EnumName<E> (&names)[N], E v) {
  for (const auto& n : names) {
    if (n.value == v) return n.name;
  }
  throw ConfigError("unnamed enumeration value");
}

template <class E, std::size_t N>
E enum_from(const EnumName<E> (&names)[N], const std::string& s, const char* field) {
  for (const auto& n : names) {
    if (s == n.name) return n.value;
  }
  std::string allowed;
  for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.name;
  throw ConfigError(std::string(field) + ": unknown value '" + s + "' (expected one of " + allowed + ")");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
  using namespace detail;
  json j;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["snr_db"] = c.snr_db;
  j["jsr_db"] = c.jsr_db;
  j["rb"] = c.rb;
  j["threads"] = c.threads;
  j["failure_tolerance"] = c.failure_tolerance;
  j["out_dir"] = c.out_dir;
  j["link"] = {{"sequence_length", c.link.sequence_length},
               {"roots", c.link.roots},
               {"shift_size", c.link.shift_size},
               {"users", c.link.users},
               {"victim", c.link.victim},
               {"taps", c.link.taps},
               {"subcarrier_spacing_hz", c.link.subcarrier_spacing_hz},
               {"samples_per_rb", c.link.samples_per_rb},
               {"user_power", c.link.user_power},
               {"noise_convention", enum_to(kNoiseNames, c.link.noise_convention)}};
  j["channel"] = {{"antennas", c.channel.antennas},
                  {"spacing_wavelengths", c.channel.spacing_wavelengths},
                  {"inner_radius_m", c.channel.inner_radius_m},
                  {"outer_radius_m", c.channel.outer_radius_m},
                  {"cluster_table", c.channel.cluster_table},
                  {"rays_per_cluster", c.channel.rays_per_cluster}};
  j["impairments"] = {{"power_fluctuation_db", c.impairments.power_fluctuation_db},
                      {"attack_phase_jitter_rad", c.impairments.attack_phase_jitter_rad}};
  j["probes"] = {{"kind", enum_to(kProbeNames, c.probes.kind)},
                 {"refresh", enum_to(kRefreshNames, c.probes.refresh)}};
  j["extractor"] = {{"iterations", c.extractor.iterations},
                    {"step_scale", c.extractor.step_scale},
                    {"alpha", c.extractor.alpha},
                    {"tolerance", c.extractor.tolerance},
                    {"max_backtracks", c.extractor.max_backtracks},
                    {"divergence_factor", c.extractor.divergence_factor},
                    {"support_floor", c.extractor.support_floor},
                    {"gradient", enum_to(kGradientNames, c.extractor.gradient)}};
  j["detector"] = {{"eta", c.eta}, {"policy", enum_to(kPolicyNames, c.policy)}};
  j["sd"] = {{"rule", enum_to(kSdNames, c.sd.rule)},
             {"noise_floor_multiple", c.sd.noise_floor_multiple},
             {"edge_margin", c.sd.edge_margin},
             {"expected_dimension", c.sd.expected_dimension},
             {"relative_zero", c.sd.relative_zero}};
  j["change_point"] = {{"stream_length", c.change_point.stream_length}, {"onset", c.change_point.onset}};
  return j;
}

/// Overlay `j` onto `base`. Unknown keys are configuration errors.
inline ScenarioConfig from_json(const json& j, ScenarioConfig c = {}) {
  using namespace detail;
  try {
    reject_unknown(j,
                   {"seed", "trials", "snr_db", "jsr_db", "rb", "threads", "failure_tolerance", "out_dir", "link",
                    "channel", "impairments", "probes", "extractor", "detector", "sd", "change_point"},
                   "config");
    read(j, "seed", c.seed);
    read(j, "trials", c.trials);
    read(j, "snr_db", c.snr_db);
    read(j, "jsr_db", c.jsr_db);
    read(j, "rb", c.rb);
    read(j, "threads", c.threads);
    read(j, "failure_tolerance", c.failure_tolerance);
    read(j, "out_dir", c.out_dir);
    if (j.contains("link")) {
      const auto& s = j.at("link");
      reject_unknown(s,
                     {"sequence_length", "roots", "shift_size", "users", "victim", "taps", "subcarrier_spacing_hz",
                      "samples_per_rb", "user_power", "noise_convention"},
                     "link");
      read(s, "sequence_length", c.link.sequence_length);
      read(s, "roots", c.link.roots);
      read(s, "shift_size", c.link.shift_size);
      read(s, "users", c.link.users);
      read(s, "victim", c.link.victim);
      read(s, "taps", c.link.taps);
      read(s, "subcarrier_spacing_hz", c.link.subcarrier_spacing_hz);
      read(s, "samples_per_rb", c.link.samples_per_rb);
      read(s, "user_power", c.link.user_power);
      if (s.contains("noise_convention")) {
        c.link.noise_convention = enum_from(kNoiseNames, s.at("noise_convention").get<std::string>(), "link.noise_convention");
      }
    }
    if (j.contains("channel")) {
      const auto& s = j.at("channel");
      reject_unknown(s,
                     {"antennas", "spacing_wavelengths", "inner_radius_m", "outer_radius_m", "cluster_table",
                      "rays_per_cluster"},
                     "channel");
      read(s, "antennas", c.channel.antennas);
      read(s, "spacing_wavelengths", c.channel.spacing_wavelengths);
      read(s, "inner_radius_m", c.channel.inner_radius_m);
      read(s, "outer_radius_m", c.channel.outer_radius_m);
      read(s, "cluster_table", c.channel.cluster_table);
      read(s, "rays_per_cluster", c.channel.rays_per_cluster);
    }
    if (j.contains("impairments")) {
      const auto& s = j.at("impairments");
      reject_unknown(s, {"power_fluctuation_db", "attack_phase_jitter_rad"}, "impairments");
      read(s, "power_fluctuation_db", c.impairments.power_fluctuation_db);
      read(s, "attack_phase_jitter_rad", c.impairments.attack_phase_jitter_rad);
    }
    if (j.contains("probes")) {
      const auto& s = j.at("probes");
      reject_unknown(s, {"kind", "refresh"}, "probes");
      if (s.contains("kind")) c.probes.kind = enum_from(kProbeNames, s.at("kind").get<std::string>(), "probes.kind");
      if (s.contains("refresh")) {
        c.probes.refresh = enum_from(kRefreshNames, s.at("refresh").get<std::string>(), "probes.refresh");
      }
    }
    if (j.contains("extractor")) {
      const auto& s = j.at("extractor");
      reject_unknown(s,
                     {"iterations", "step_scale", "alpha", "tolerance", "max_backtracks", "divergence_factor",
                      "support_floor", "gradient"},
                     "extractor");
      read(s, "iterations", c.extractor.iterations);
      read(s, "step_scale", c.extractor.step_scale);
      read(s, "alpha", c.extractor.alpha);
      read(s, "tolerance", c.extractor.tolerance);
      read(s, "max_backtracks", c.extractor.max_backtracks);
      read(s, "divergence_factor", c.extractor.divergence_factor);
      read(s, "support_floor", c.extractor.support_floor);
      if (s.contains("gradient")) {
        c.extractor.gradient = enum_from(kGradientNames, s.at("gradient").get<std::string>(), "extractor.gradient");
      }
    }
    if (j.contains("detector")) {
      const auto& s = j.at("detector");
      reject_unknown(s, {"eta", "policy"}, "detector");
      read(s, "eta", c.eta);
      if (s.contains("policy")) c.policy = enum_from(kPolicyNames, s.at("policy").get<std::string>(), "detector.policy");
    }
    if (j.contains("sd")) {
      const auto& s = j.at("sd");
      reject_unknown(s, {"rule", "noise_floor_multiple", "edge_margin", "expected_dimension", "relative_zero"}, "sd");
      if (s.contains("rule")) c.sd.rule = enum_from(kSdNames, s.at("rule").get<std::string>(), "sd.rule");
      read(s, "noise_floor_multiple", c.sd.noise_floor_multiple);
      read(s, "edge_margin", c.sd.edge_margin);
      read(s, "expected_dimension", c.sd.expected_dimension);
      read(s, "relative_zero", c.sd.relative_zero);
    }
    if (j.contains("change_point")) {
      const auto& s = j.at("change_point");
      reject_unknown(s, {"stream_length", "onset"}, "change_point");
      read(s, "stream_length", c.change_point.stream_length);
      read(s, "onset", c.change_point.onset);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

/// FNV-1a 64 over the canonical (sorted-key, compact) JSON dump, excluding
/// fields that do not affect results (threads, out_dir).
inline std::string config_hash(const ScenarioConfig& c) {
  json j = to_json(c);
  j.erase("threads");
  j.erase("out_dir");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline ClusterTable resolve_cluster_table(const ScenarioConfig& c) {
  return c.channel.cluster_table.empty() ? default_cluster_table() : load_cluster_table(c.channel.cluster_table);
}

}  // namespace dmrs::harness
