#pragma once

// Reference detectors: average-energy test and eigenvalue-count test on the
// sample covariance of the stacked LS estimates.

#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/phy_link.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace dmrs {

struct EdConfig {
  double threshold = 0.0;  // alarm iff statistic > threshold
};

/// Mean of s(l) over the subframe.
inline double ed_statistic(const SubframeObservation& obs) {
  if (obs.energy.size() < 1) throw ParameterError("ed_statistic: empty observation");
  return obs.energy.mean();
}

inline bool ed_alarm(double statistic, const EdConfig& cfg) { return statistic > cfg.threshold; }

enum class SdRule {
  // eigenvalue > noise_floor_multiple * median eigenvalue
  MedianMultiple,
  // eigenvalue > edge_margin * Marchenko-Pastur upper edge, with the noise
  // level inferred from the median eigenvalue
  MarchenkoPastur,
};

struct SdConfig {
  SdRule rule = SdRule::MarchenkoPastur;
  double noise_floor_multiple = 3.0;
  double edge_margin = 1.2;
  int expected_dimension = 1;    // d0, alarm iff count > d0
  double relative_zero = 1e-10;  // eigenvalues below this fraction of the largest are zero

  void validate() const {
    if (expected_dimension < 1) throw ConfigError("sd: expected dimension must be >= 1");
    if (!(noise_floor_multiple > 0.0)) throw ConfigError("sd: noise-floor multiple must be positive");
    if (!(edge_margin > 0.0)) throw ConfigError("sd: edge margin must be positive");
  }
};

/// Median of the unit-variance Marchenko-Pastur law with aspect ratio y in (0, 1].
inline double marchenko_pastur_median(double y) {
  if (!(y > 0.0 && y <= 1.0)) throw ParameterError("marchenko_pastur_median: ratio must lie in (0, 1]");
  const double a = (1.0 - std::sqrt(y)) * (1.0 - std::sqrt(y));
  const double b = (1.0 + std::sqrt(y)) * (1.0 + std::sqrt(y));
  // t = a + (b - a) sin^2(th/2) removes the square-root endpoints. With
  // y = 1 the lower edge is 0 and sin^2(th/2) cancels against t.
  auto integrand = [&](double th) {
    const double s2 = std::sin(0.5 * th) * std::sin(0.5 * th);
    const double c2 = 1.0 - s2;
    const double t = a + (b - a) * s2;
    const double ratio = t > 0.0 ? s2 / t : 1.0 / (b - a);
    return (b - a) * (b - a) * c2 * ratio / (2.0 * kPi * y);
  };
  auto cdf = [&](double th_end) {
    const int n = 400;  // even, Simpson
    const double h = th_end / n;
    double acc = integrand(0.0) + integrand(th_end);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
    return acc * h / 3.0;
  };
  double lo = 0.0, hi = kPi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < 0.5 ? lo : hi) = mid;
  }
  const double th = 0.5 * (lo + hi);
  return a + 0.5 * (b - a) * (1.0 - std::cos(th));
}

/// Eigenvalues of the non-centered sample covariance (1/L) X X^H, computed on
/// whichever of X X^H and X^H X is smaller. Only the min(D, L) eigenvalues the
/// window can support are returned, in ascending order.
inline RealVec window_eigenvalues(const ComplexMat& window) {
  const Eigen::Index d = window.rows();
  const Eigen::Index l = window.cols();
  const ComplexMat gram = d <= l ? ComplexMat(window * window.adjoint() / static_cast<double>(l))
                                 : ComplexMat(window.adjoint() * window / static_cast<double>(l));
  Eigen::SelfAdjointEigenSolver<ComplexMat> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error("sd_statistic: eigen-decomposition failed");
  return eig.eigenvalues();
}

/// Number of significant eigenvalues of the window covariance under
/// `cfg.rule`; the median is taken over the supported spectrum. Eigenvalues
/// that are numerically zero never count.
inline int sd_statistic(const StackedEstimate& window, const SdConfig& cfg = {}) {
  cfg.validate();
  if (window.sample_count() < 2) throw ParameterError("sd_statistic: window needs at least two samples");
  const RealVec ev = window_eigenvalues(window.samples);
  std::vector<double> v(ev.data(), ev.data() + ev.size());
  const double largest = std::max(0.0, v.back());
  if (largest <= 0.0) return 0;
  const double zero = cfg.relative_zero * largest;
  std::vector<double> sorted = v;
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  double median = sorted[mid];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  double cut = 0.0;
  if (cfg.rule == SdRule::MedianMultiple) {
    cut = cfg.noise_floor_multiple * std::max(median, 0.0);
  } else {
    // Rescale to the larger dimension so the noise bulk follows MP(y), y <= 1.
    const double d = static_cast<double>(window.dimension());
    const double l = static_cast<double>(window.sample_count());
    const double big = std::max(d, l);
    const double y = std::min(d, l) / big;
    const double noise = std::max(median, 0.0) * (l / big) / marchenko_pastur_median(y);
    const double edge = noise * (1.0 + std::sqrt(y)) * (1.0 + std::sqrt(y));
    cut = cfg.edge_margin * edge * (big / l);
  }
  cut = std::max(cut, zero);
  return static_cast<int>(std::count_if(v.begin(), v.end(), [&](double e) { return e > cut; }));
}

inline bool sd_alarm(int dimension, const SdConfig& cfg) { return dimension > cfg.expected_dimension; }

}  // namespace dmrs
