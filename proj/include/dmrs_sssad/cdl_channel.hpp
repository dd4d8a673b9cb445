#pragma once

// Clustered-delay-line channel generator for a uniform linear array.
//
// Each cluster contributes a bundle of rays around its azimuth of arrival,
// mapped onto the nearest tap of the sampled impulse response. The shipped
// default table follows the CDL-D layout (one dominant LOS ray plus weaker
// NLOS clusters) but is a stand-in, not a transcription of the 3GPP values.

#include "dmrs_sssad/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace dmrs {

struct Cluster {
  double delay_s = 0.0;
  double power = 0.0;       // linear, normalized over the table
  double aoa_deg = 0.0;     // offset from the source's line-of-sight azimuth
  double spread_deg = 0.0;  // rms angular spread of the ray bundle
  bool los = false;         // single specular ray, no spread
};

struct ClusterTable {
  std::string name;
  double k_factor_db = 0.0;
  std::vector<Cluster> clusters;

  double total_power() const {
    double p = 0.0;
    for (const auto& c : clusters) p += c.power;
    return p;
  }
};

/// Validate ordering and renormalize powers to sum to one. When the first
/// cluster is a LOS ray and a K-factor is given, the LOS ray receives
/// K/(K+1) of the power and the NLOS clusters share the rest in their
/// tabulated proportions.
inline ClusterTable normalize_table(ClusterTable table, bool apply_k_factor = true) {
  if (table.clusters.empty()) throw TableError("cluster table '" + table.name + "' is empty");
  double prev = 0.0;
  for (const auto& c : table.clusters) {
    if (!(c.delay_s >= 0.0)) throw TableError("cluster delay must be non-negative");
    if (c.delay_s < prev) throw TableError("cluster delays must be sorted ascending");
    if (!(c.power >= 0.0)) throw TableError("cluster power must be non-negative");
    if (!(c.spread_deg >= 0.0)) throw TableError("angular spread must be non-negative");
    prev = c.delay_s;
  }
  const bool has_los = table.clusters.front().los && table.clusters.size() > 1;
  if (apply_k_factor && has_los) {
    const double k = db_to_linear(table.k_factor_db);
    double nlos = 0.0;
    for (std::size_t i = 1; i < table.clusters.size(); ++i) nlos += table.clusters[i].power;
    if (nlos <= 0.0) throw TableError("NLOS clusters carry no power");
    table.clusters.front().power = k / (k + 1.0);
    for (std::size_t i = 1; i < table.clusters.size(); ++i) {
      table.clusters[i].power = table.clusters[i].power / nlos / (k + 1.0);
    }
  }
  const double total = table.total_power();
  if (total <= 0.0) throw TableError("cluster table carries no power");
  for (auto& c : table.clusters) c.power /= total;
  return table;
}

// Stand-in for a CDL-D style profile (delay spread 30 ns, K = 13.3 dB).
inline ClusterTable default_cluster_table() {
  ClusterTable t;
  t.name = "cdl-d-standin";
  t.k_factor_db = 13.3;
  // delay ns, power dB, AoA offset deg, spread deg
  const double rows[][4] = {
      {0.0, -0.2, 0.0, 0.0},      {0.0, -13.5, 0.0, 8.0},     {1.05, -18.8, -90.8, 8.0},
      {18.36, -21.0, -90.8, 8.0}, {40.89, -22.8, -90.8, 8.0}, {42.15, -17.9, -17.0, 8.0},
      {53.25, -22.9, 43.0, 8.0},  {54.12, -20.1, -17.0, 8.0}, {77.88, -21.9, -17.0, 8.0},
      {121.26, -27.8, -105.5, 8.0}, {238.11, -23.6, -52.3, 8.0}, {282.72, -24.8, 60.4, 8.0},
      {291.24, -30.0, 170.9, 8.0}, {375.75, -27.7, 96.2, 8.0},
  };
  bool first = true;
  for (const auto& r : rows) {
    t.clusters.push_back({r[0] * 1e-9, db_to_linear(r[1]), r[2], r[3], first});
    first = false;
  }
  return normalize_table(t);
}

/// Parse a cluster table from JSON. Schema (all arrays the same length):
///   { "name": str, "k_factor_db": num, "los_first": bool,
///     "delays_ns": [...], "powers_db": [...] | "powers": [...],
///     "aoa_deg": [...], "spread_deg": [...] }
inline ClusterTable cluster_table_from_json(const nlohmann::json& j) {
  ClusterTable t;
  try {
    t.name = j.value("name", std::string{"unnamed"});
    t.k_factor_db = j.value("k_factor_db", 0.0);
    const bool los_first = j.value("los_first", false);
    const auto delays = j.at("delays_ns").get<std::vector<double>>();
    std::vector<double> powers;
    if (j.contains("powers_db")) {
      for (double db : j.at("powers_db").get<std::vector<double>>()) powers.push_back(db_to_linear(db));
    } else {
      powers = j.at("powers").get<std::vector<double>>();
    }
    const auto aoa = j.at("aoa_deg").get<std::vector<double>>();
    std::vector<double> spread(delays.size(), 0.0);
    if (j.contains("spread_deg")) spread = j.at("spread_deg").get<std::vector<double>>();
    if (powers.size() != delays.size() || aoa.size() != delays.size() ||
        spread.size() != delays.size()) {
      throw TableError("cluster table '" + t.name + "': section lengths differ");
    }
    for (std::size_t i = 0; i < delays.size(); ++i) {
      t.clusters.push_back({delays[i] * 1e-9, powers[i], aoa[i], spread[i], los_first && i == 0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw TableError(std::string("cluster table: ") + e.what());
  }
  return normalize_table(t);
}

inline ClusterTable load_cluster_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cluster table: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw TableError("cluster table " + path + ": " + e.what());
  }
  return cluster_table_from_json(j);
}

struct PolarPosition {
  double radius_m = 0.0;
  double azimuth_deg = 0.0;
};

struct ArraySpec {
  int antennas = 64;
  double spacing_wavelengths = 0.5;
};

struct GeometryScenario {
  ArraySpec array;
  double inner_radius_m = 100.0;
  double outer_radius_m = 120.0;
  std::vector<PolarPosition> users;
  std::optional<PolarPosition> attacker;

  void validate() const {
    if (array.antennas < 1) throw ParameterError("array needs at least one antenna");
    if (!(inner_radius_m < outer_radius_m)) throw ParameterError("inner radius must be below outer radius");
    auto check = [&](const PolarPosition& p) {
      if (p.radius_m < inner_radius_m || p.radius_m > outer_radius_m) {
        throw ParameterError("position radius outside deployment annulus");
      }
    };
    for (const auto& u : users) check(u);
    if (attacker) check(*attacker);
  }
};

struct SourceId {
  enum class Kind { User, Attacker } kind = Kind::User;
  int index = 0;

  static SourceId user(int k) { return {Kind::User, k}; }
  static SourceId attacker() { return {Kind::Attacker, 0}; }
};

struct TapGrid {
  int taps = 4;                        // delay-spread length tau
  double tap_duration_s = 1.0 / (139 * 30e3);
};

struct ChannelRealization {
  ComplexMat taps;  // tau x M, row t = tap t across antennas
  SourceId source;
  double azimuth_deg = 0.0;
  std::vector<double> ray_aoa_deg;  // realized ray angles, LOS first

  int tap_count() const { return static_cast<int>(taps.rows()); }
  int antennas() const { return static_cast<int>(taps.cols()); }
};

/// ULA response exp(i*2*pi*d*m*sin(theta)), m = 0..M-1, unit-modulus entries.
inline ComplexVec steering_vector(const ArraySpec& array, double angle_deg) {
  ComplexVec a(array.antennas);
  const double phase_step = 2.0 * kPi * array.spacing_wavelengths * std::sin(deg_to_rad(angle_deg));
  for (int m = 0; m < array.antennas; ++m) a(m) = std::polar(1.0, phase_step * m);
  return a;
}

inline int tap_index(const Cluster& c, const TapGrid& grid) {
  return static_cast<int>(std::lround(c.delay_s / grid.tap_duration_s));
}

/// Draw one channel realization toward `azimuth_deg`. Per-draw randomness is
/// confined to ray phases and within-cluster angle offsets.
inline ChannelRealization draw_channel_at(const ArraySpec& array, const ClusterTable& table,
                                          const TapGrid& grid, double azimuth_deg, SourceId source,
                                          std::uint64_t seed, int rays_per_cluster = 20) {
  if (table.clusters.empty()) throw TableError("draw_channel: empty cluster table");
  if (grid.taps < 1) throw ParameterError("draw_channel: need at least one tap");
  if (array.antennas < 1) throw ParameterError("draw_channel: need at least one antenna");
  for (const auto& c : table.clusters) {
    if (tap_index(c, grid) >= grid.taps) {
      throw TableError("cluster delay " + std::to_string(c.delay_s * 1e9) +
                       " ns falls beyond the " + std::to_string(grid.taps) + "-tap window");
    }
  }
  Rng rng(seed);
  ChannelRealization ch;
  ch.taps = ComplexMat::Zero(grid.taps, array.antennas);
  ch.source = source;
  ch.azimuth_deg = azimuth_deg;
  // Uniform offsets on +-sqrt(3)*spread have the requested rms spread.
  const double half_width = std::sqrt(3.0);
  for (const auto& c : table.clusters) {
    const int t = tap_index(c, grid);
    const int rays = (c.los || c.spread_deg == 0.0) ? 1 : rays_per_cluster;
    const double amp = std::sqrt(c.power / rays);
    for (int r = 0; r < rays; ++r) {
      double angle = azimuth_deg + c.aoa_deg;
      if (rays > 1) angle += rng.uniform(-half_width, half_width) * c.spread_deg;
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      ch.ray_aoa_deg.push_back(angle);
      ch.taps.row(t) += (std::polar(amp, phase) * steering_vector(array, angle)).transpose();
    }
  }
  return ch;
}

inline ChannelRealization draw_channel(const GeometryScenario& scenario, const ClusterTable& table,
                                       const TapGrid& grid, SourceId source, std::uint64_t seed) {
  const PolarPosition* pos = nullptr;
  if (source.kind == SourceId::Kind::Attacker) {
    if (!scenario.attacker) throw ParameterError("draw_channel: scenario has no attacker");
    pos = &*scenario.attacker;
  } else {
    if (source.index < 0 || static_cast<std::size_t>(source.index) >= scenario.users.size()) {
      throw ParameterError("draw_channel: user index out of range");
    }
    pos = &scenario.users[static_cast<std::size_t>(source.index)];
  }
  return draw_channel_at(scenario.array, table, grid, pos->azimuth_deg, source, seed);
}

/// Area-uniform placement in the annulus [inner, outer].
inline std::vector<PolarPosition> place_actors(double inner_m, double outer_m, int count,
                                               std::uint64_t seed) {
  if (!(inner_m > 0.0) || !(inner_m < outer_m)) {
    throw ParameterError("place_actors: require 0 < inner < outer");
  }
  if (count < 0) throw ParameterError("place_actors: negative count");
  Rng rng(seed);
  std::vector<PolarPosition> out;
  out.reserve(static_cast<std::size_t>(count));
  const double a = inner_m * inner_m;
  const double b = outer_m * outer_m;
  for (int i = 0; i < count; ++i) {
    const double r = std::clamp(std::sqrt(rng.uniform(a, b)), inner_m, outer_m);
    out.push_back({r, rng.uniform(0.0, 360.0)});
  }
  return out;
}

}  // namespace dmrs
