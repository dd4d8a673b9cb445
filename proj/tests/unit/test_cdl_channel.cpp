#include "dmrs_sssad/cdl_channel.hpp"
#include "dmrs_sssad/phy_link.hpp"
#include "dmrs_sssad/sparsity_extractor.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace dmrs;

namespace {

ClusterTable single_cluster(double spread_deg = 0.0, double aoa = 0.0) {
  ClusterTable t;
  t.name = "single";
  t.clusters.push_back({0.0, 1.0, aoa, spread_deg, false});
  return normalize_table(t);
}

const TapGrid kGrid{4, 1.0 / (139 * 30e3)};

// Smallest set of beams (per-tap DFT bins) holding `fraction` of the energy.
std::set<int> energy_support(const ComplexVec& beamspace, double fraction) {
  std::vector<int> idx(static_cast<std::size_t>(beamspace.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return std::norm(beamspace(a)) > std::norm(beamspace(b)); });
  const double total = beamspace.squaredNorm();
  double acc = 0.0;
  std::set<int> out;
  for (int i : idx) {
    if (acc >= fraction * total) break;
    acc += std::norm(beamspace(i));
    out.insert(i);
  }
  return out;
}

}  // namespace

TEST(ClusterTable, NormalizesPowers) {
  const auto t = default_cluster_table();
  EXPECT_NEAR(t.total_power(), 1.0, 1e-9);
  for (std::size_t i = 1; i < t.clusters.size(); ++i) EXPECT_GE(t.clusters[i].delay_s, t.clusters[i - 1].delay_s);
  // LOS share follows the K-factor.
  const double k = db_to_linear(t.k_factor_db);
  EXPECT_NEAR(t.clusters.front().power, k / (k + 1.0), 1e-12);
}

TEST(ClusterTable, RejectsBadTables) {
  ClusterTable empty;
  EXPECT_THROW(normalize_table(empty), TableError);
  ClusterTable unsorted;
  unsorted.clusters = {{2e-9, 1.0, 0.0, 0.0, false}, {1e-9, 1.0, 0.0, 0.0, false}};
  EXPECT_THROW(normalize_table(unsorted), TableError);
  ClusterTable negative;
  negative.clusters = {{-1e-9, 1.0, 0.0, 0.0, false}};
  EXPECT_THROW(normalize_table(negative), TableError);
}

TEST(ClusterTable, LoadsFromJson) {
  const auto path = std::filesystem::temp_directory_path() / "dmrs_table_test.json";
  {
    std::ofstream out(path);
    out << R"({"name": "two", "k_factor_db": 0, "los_first": false,
               "delays_ns": [0, 10], "powers_db": [0, -3], "aoa_deg": [0, 30], "spread_deg": [0, 5]})";
  }
  const auto t = load_cluster_table(path.string());
  ASSERT_EQ(t.clusters.size(), 2u);
  EXPECT_NEAR(t.total_power(), 1.0, 1e-12);
  EXPECT_NEAR(t.clusters[0].power / t.clusters[1].power, db_to_linear(3.0), 1e-12);
  EXPECT_NEAR(t.clusters[1].delay_s, 10e-9, 1e-18);
  std::filesystem::remove(path);
  EXPECT_THROW(cluster_table_from_json(nlohmann::json::parse(R"({"delays_ns": [0], "powers": [1, 2], "aoa_deg": [0]})")),
               TableError);
  EXPECT_THROW(load_cluster_table("/nonexistent/table.json"), IoError);
}

TEST(ClusterTable, ShippedDataFileMatchesBuiltIn) {
  const auto t = load_cluster_table(std::string(DMRS_SOURCE_DIR) + "/data/cdl_d_standin.json");
  const auto b = default_cluster_table();
  ASSERT_EQ(t.clusters.size(), b.clusters.size());
  for (std::size_t i = 0; i < t.clusters.size(); ++i) {
    EXPECT_NEAR(t.clusters[i].delay_s, b.clusters[i].delay_s, 1e-15);
    EXPECT_NEAR(t.clusters[i].power, b.clusters[i].power, 1e-12);
    EXPECT_EQ(t.clusters[i].aoa_deg, b.clusters[i].aoa_deg);
    EXPECT_EQ(t.clusters[i].los, b.clusters[i].los);
  }
}

TEST(DrawChannel, BroadsideClusterGivesAllOnesSteering) {
  const ArraySpec array{4, 0.5};
  const auto ch = draw_channel_at(array, single_cluster(), kGrid, 0.0, SourceId::user(0), 5);
  ASSERT_EQ(ch.taps.rows(), 4);
  ASSERT_EQ(ch.taps.cols(), 4);
  const cplx ref = ch.taps(0, 0);
  EXPECT_NEAR(std::abs(ref), 1.0, 1e-12);
  for (int m = 0; m < 4; ++m) EXPECT_NEAR(std::abs(ch.taps(0, m) - ref), 0.0, 1e-12);
  EXPECT_NEAR(ch.taps.bottomRows(3).norm(), 0.0, 0.0);
}

TEST(DrawChannel, SteeringVectorPhaseProgression) {
  const ArraySpec array{8, 0.5};
  const auto a = steering_vector(array, 30.0);
  for (int m = 0; m < 8; ++m) {
    EXPECT_NEAR(std::arg(a(m) * std::conj(std::polar(1.0, kPi * std::sin(kPi / 6.0) * m))), 0.0, 1e-12);
  }
}

TEST(DrawChannel, MeanTapEnergyMatchesPower) {
  const ArraySpec array{8, 0.5};
  const auto table = single_cluster(10.0);
  const int draws = 10000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    acc += draw_channel_at(array, table, kGrid, 0.0, SourceId::user(0), derive_seed(11, i)).taps.row(0).squaredNorm();
  }
  EXPECT_NEAR(acc / draws, 8.0, 0.05 * 8.0);
}

TEST(DrawChannel, EnergyNormalizationOverDefaultTable) {
  const ArraySpec array{16, 0.5};
  const auto table = default_cluster_table();
  const int draws = 10000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    acc += draw_channel_at(array, table, kGrid, 45.0, SourceId::user(0), derive_seed(12, i), 5).taps.squaredNorm();
  }
  EXPECT_NEAR(acc / draws, 16.0 * table.total_power(), 0.05 * 16.0);
}

TEST(DrawChannel, DifferentAzimuthsPeakInDifferentBeams) {
  const ArraySpec array{64, 0.5};
  const auto table = default_cluster_table();
  auto peak = [&](double az) {
    RealVec spectrum = RealVec::Zero(64);
    for (int i = 0; i < 200; ++i) {
      const auto ch = draw_channel_at(array, table, kGrid, az, SourceId::user(0), derive_seed(13, i));
      // Brute-force beam scan over DFT bins of tap 0.
      for (int k = 0; k < 64; ++k) {
        cplx acc = 0.0;
        for (int m = 0; m < 64; ++m) acc += ch.taps(0, m) * std::polar(1.0, -2.0 * kPi * k * m / 64.0);
        spectrum(k) += std::norm(acc);
      }
    }
    Eigen::Index best = 0;
    spectrum.maxCoeff(&best);
    return best;
  };
  EXPECT_NE(peak(0.0), peak(60.0));
}

TEST(DrawChannel, BeamspaceConcentratesEnergy) {
  ClusterTable t;
  t.name = "sparse";
  t.clusters = {{0.0, 1.0, 0.0, 1.0, false}, {40e-9, 0.5, 30.0, 1.0, false}};
  t = normalize_table(t);
  const ArraySpec array{64, 0.5};
  double mean_fraction = 0.0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) {
    const auto ch = draw_channel_at(array, t, kGrid, 10.0, SourceId::user(0), derive_seed(14, i));
    const ComplexVec b = to_beamspace(stack_taps(ch.taps), 4, 64);
    std::vector<double> e(static_cast<std::size_t>(b.size()));
    for (Eigen::Index k = 0; k < b.size(); ++k) e[static_cast<std::size_t>(k)] = std::norm(b(k));
    std::sort(e.rbegin(), e.rend());
    double top = 0.0;
    for (int k = 0; k < 6; ++k) top += e[static_cast<std::size_t>(k)];  // 3 beams per cluster
    mean_fraction += top / b.squaredNorm();
  }
  EXPECT_GE(mean_fraction / draws, 0.9);
}

TEST(DrawChannel, SeparatedSourcesHaveDisjointSupports) {
  const ArraySpec array{64, 0.5};
  const auto table = default_cluster_table();
  double jaccard = 0.0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) {
    const double az = 360.0 * i / draws;
    const auto a = draw_channel_at(array, table, kGrid, az, SourceId::user(0), derive_seed(15, i));
    const auto b = draw_channel_at(array, table, kGrid, az + 20.0 + 40.0 * (i % 3), SourceId::attacker(),
                                   derive_seed(16, i));
    const auto sa = energy_support(to_beamspace(stack_taps(a.taps), 4, 64), 0.9);
    const auto sb = energy_support(to_beamspace(stack_taps(b.taps), 4, 64), 0.9);
    std::set<int> inter, uni = sa;
    for (int k : sb) {
      if (sa.count(k)) inter.insert(k);
      uni.insert(k);
    }
    jaccard += static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  }
  EXPECT_LT(jaccard / draws, 0.5);
}

TEST(DrawChannel, Reproducible) {
  const ArraySpec array{8, 0.5};
  const auto table = default_cluster_table();
  const auto a = draw_channel_at(array, table, kGrid, 12.0, SourceId::user(3), 99);
  const auto b = draw_channel_at(array, table, kGrid, 12.0, SourceId::user(3), 99);
  EXPECT_EQ(a.taps, b.taps);
  EXPECT_EQ(a.ray_aoa_deg, b.ray_aoa_deg);
  EXPECT_TRUE(a.taps.allFinite());
}

TEST(DrawChannel, Errors) {
  const ArraySpec array{8, 0.5};
  ClusterTable late;
  late.clusters = {{1e-6, 1.0, 0.0, 0.0, false}};
  EXPECT_THROW(draw_channel_at(array, late, kGrid, 0.0, SourceId::user(0), 1), TableError);
  EXPECT_THROW(draw_channel_at(array, ClusterTable{}, kGrid, 0.0, SourceId::user(0), 1), TableError);

  GeometryScenario sc;
  sc.array = array;
  sc.users = {{110.0, 10.0}};
  EXPECT_THROW(draw_channel(sc, default_cluster_table(), kGrid, SourceId::attacker(), 1), ParameterError);
  EXPECT_THROW(draw_channel(sc, default_cluster_table(), kGrid, SourceId::user(1), 1), ParameterError);
  EXPECT_NO_THROW(draw_channel(sc, default_cluster_table(), kGrid, SourceId::user(0), 1));
}

TEST(Geometry, Validation) {
  GeometryScenario sc;
  sc.users = {{110.0, 0.0}};
  EXPECT_NO_THROW(sc.validate());
  sc.users.push_back({130.0, 0.0});
  EXPECT_THROW(sc.validate(), ParameterError);
  sc.users.pop_back();
  sc.inner_radius_m = 130.0;
  EXPECT_THROW(sc.validate(), ParameterError);
}

TEST(PlaceActors, AreaUniformKolmogorovSmirnov) {
  const int n = 100000;
  auto pos = place_actors(100.0, 120.0, n, 21);
  std::vector<double> r;
  r.reserve(n);
  for (const auto& p : pos) {
    ASSERT_GE(p.radius_m, 100.0);
    ASSERT_LE(p.radius_m, 120.0);
    ASSERT_GE(p.azimuth_deg, 0.0);
    ASSERT_LT(p.azimuth_deg, 360.0);
    r.push_back(p.radius_m);
  }
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = (r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)] - 100.0 * 100.0) /
                     (120.0 * 120.0 - 100.0 * 100.0);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(PlaceActors, EdgeCases) {
  EXPECT_TRUE(place_actors(100.0, 120.0, 0, 1).empty());
  for (const auto& p : place_actors(100.0, 100.0 + 1e-9, 100, 2)) {
    EXPECT_GE(p.radius_m, 100.0);
    EXPECT_LE(p.radius_m, 100.0 + 1e-9);
  }
  EXPECT_THROW(place_actors(120.0, 100.0, 1, 1), ParameterError);
  EXPECT_THROW(place_actors(0.0, 100.0, 1, 1), ParameterError);
}
