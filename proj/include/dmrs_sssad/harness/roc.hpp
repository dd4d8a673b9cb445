#pragma once

// ROC curves by threshold sweep, trapezoid AUC and paired bootstrap errors.

#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/harness/trials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dmrs::harness {

enum class Orientation {
  HighAlarms,  // alarm iff statistic >= threshold (ED, SD)
  LowAlarms,   // alarm iff statistic <= threshold (SSSAD similarity)
};

enum class Detector { Sssad, Sd, Ed };

inline const char* detector_name(Detector d) {
  switch (d) {
    case Detector::Sssad: return "sssad";
    case Detector::Sd: return "sd";
    case Detector::Ed: return "ed";
  }
  return "unknown";
}

inline Orientation orientation_of(Detector d) {
  return d == Detector::Sssad ? Orientation::LowAlarms : Orientation::HighAlarms;
}

struct RocPoint {
  double p_fa = 0.0;
  double p_d = 0.0;
  double threshold = 0.0;  // +-infinity at the sweep ends
  int n_attack = 0;        // attack-present trials behind the point
  int n_normal = 0;        // attack-absent trials behind the point
};

struct RocCurve {
  std::string detector;
  std::vector<RocPoint> points;  // p_fa ascending
  double auc = 0.0;
  std::string config_hash;
};

inline double trapezoid_auc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].p_fa - points[i - 1].p_fa) * (points[i].p_d + points[i - 1].p_d) / 2.0;
  }
  return area;
}

/// Sweep the threshold over every distinct observed value, from the setting
/// that never alarms to the one that always alarms.
inline RocCurve roc_curve(const std::string& detector, const std::vector<double>& normal,
                          const std::vector<double>& attack, Orientation orientation) {
  if (normal.empty() || attack.empty()) {
    throw InsufficientDataError("roc: detector '" + detector + "' needs both attack-present and attack-absent trials");
  }
  // Work on "higher is more suspicious" scores.
  const double sign = orientation == Orientation::HighAlarms ? 1.0 : -1.0;
  std::vector<double> n, a;
  for (double v : normal) n.push_back(sign * v);
  for (double v : attack) a.push_back(sign * v);
  std::sort(n.begin(), n.end(), std::greater<>());
  std::sort(a.begin(), a.end(), std::greater<>());
  std::vector<double> thresholds(n);
  thresholds.insert(thresholds.end(), a.begin(), a.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const int nn = static_cast<int>(n.size());
  const int na = static_cast<int>(a.size());
  const double inf = std::numeric_limits<double>::infinity();
  RocCurve curve;
  curve.detector = detector;
  curve.points.push_back({0.0, 0.0, sign * inf, na, nn});
  std::size_t in = 0, ia = 0;
  for (double t : thresholds) {
    while (in < n.size() && n[in] >= t) ++in;
    while (ia < a.size() && a[ia] >= t) ++ia;
    curve.points.push_back({static_cast<double>(in) / nn, static_cast<double>(ia) / na, sign * t, na, nn});
  }
  if (curve.points.back().p_fa < 1.0 || curve.points.back().p_d < 1.0) {
    curve.points.push_back({1.0, 1.0, -sign * inf, na, nn});
  }
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

/// P(attack score more suspicious than normal score) + P(tie) / 2, by ranks.
inline double rank_auc(std::vector<double> normal, std::vector<double> attack, Orientation orientation) {
  if (normal.empty() || attack.empty()) throw InsufficientDataError("rank_auc: empty class");
  const double sign = orientation == Orientation::HighAlarms ? 1.0 : -1.0;
  std::vector<std::pair<double, int>> all;
  all.reserve(normal.size() + attack.size());
  for (double v : normal) all.emplace_back(sign * v, 0);
  for (double v : attack) all.emplace_back(sign * v, 1);
  std::sort(all.begin(), all.end());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 1) rank_sum += mid_rank;
    }
    i = j;
  }
  const double na = static_cast<double>(attack.size());
  const double nn = static_cast<double>(normal.size());
  return (rank_sum - na * (na + 1.0) / 2.0) / (na * nn);
}

struct DetectorSamples {
  std::vector<double> normal;
  std::vector<double> attack;
};

inline DetectorSamples detector_samples(const std::vector<TrialOutcome>& outcomes, Detector d) {
  DetectorSamples s;
  for (const auto& o : outcomes) {
    if (!o.ok || !o.has_present) continue;
    switch (d) {
      case Detector::Sssad:
        s.normal.push_back(o.c_absent);
        s.attack.push_back(o.c_present);
        break;
      case Detector::Sd:
        s.normal.push_back(o.sd_absent);
        s.attack.push_back(o.sd_present);
        break;
      case Detector::Ed:
        s.normal.push_back(o.ed_absent);
        s.attack.push_back(o.ed_present);
        break;
    }
  }
  return s;
}

inline RocCurve roc_from_outcomes(const std::vector<TrialOutcome>& outcomes, Detector d,
                                  const std::string& config_hash = {}) {
  const auto s = detector_samples(outcomes, d);
  RocCurve curve = roc_curve(detector_name(d), s.normal, s.attack, orientation_of(d));
  curve.config_hash = config_hash;
  return curve;
}

/// Standard error of AUC(a) - AUC(b) under a paired bootstrap over trials.
inline double bootstrap_auc_difference_se(const std::vector<TrialOutcome>& outcomes, Detector a, Detector b,
                                          int resamples = 200, std::uint64_t seed = 1) {
  const auto sa = detector_samples(outcomes, a);
  const auto sb = detector_samples(outcomes, b);
  const std::size_t n = sa.normal.size();
  if (n < 2) throw InsufficientDataError("bootstrap: need at least two complete trials");
  if (resamples < 2) throw ParameterError("bootstrap: need at least two resamples");
  Rng rng(seed);
  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> an(n), aa(n), bn(n), ba(n);
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
      an[i] = sa.normal[k];
      aa[i] = sa.attack[k];
      bn[i] = sb.normal[k];
      ba[i] = sb.attack[k];
    }
    diffs.push_back(rank_auc(an, aa, orientation_of(a)) - rank_auc(bn, ba, orientation_of(b)));
  }
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(diffs.size());
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  return std::sqrt(var / static_cast<double>(diffs.size() - 1));
}

}  // namespace dmrs::harness
