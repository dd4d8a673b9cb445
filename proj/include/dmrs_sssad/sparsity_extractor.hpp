#pragma once

// Sparse spatial fingerprint extraction: thresholded gradient descent on the
// sample variance loss, seeded by a diagonally-thresholded spectral
// initializer.
//
// Notation used below:
//   a_l      sensing (probe) vector of sample l, dimension D = M * tau
//   s_l      observed sample
//   zeta_l   a_l^H phi
//   mu       sample mean of s
//   r_l      s_l - |zeta_l|^2 - mu + ||phi||^2        (loss residual)
//   loss     (1/L) sum_l r_l^2

#include "dmrs_sssad/cdl_channel.hpp"
#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/phy_link.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <vector>

namespace dmrs {

enum class GradientMode {
  Analytic,   // exact Wirtinger gradient of the loss
  AsPrinted,  // sum_l (s_l - zeta_l - mu + ||phi||^2) (I - a_l a_l^H) phi, literal form
};

enum class ProbeKind {
  Gaussian,   // i.i.d. CN(0, 1) entries
  Clustered,  // beamspace images of random clustered channels, unit per-entry power
};

struct ExtractorConfig {
  int iterations = 200;
  double step_scale = 0.1;  // beta = step_scale / mu
  double alpha = 4.0;       // on the mean-loss gradient scale
  double tolerance = 1e-6;  // relative-change early stop
  int max_backtracks = 20;
  double divergence_factor = 1e6;
  double support_floor = 1e-4;  // final coordinates below this fraction of max |phi_i| are zeroed
  GradientMode gradient = GradientMode::Analytic;

  void validate() const {
    if (iterations < 0) throw ConfigError("extractor: iteration budget must be non-negative");
    if (!(step_scale > 0.0)) throw ConfigError("extractor: step size must be positive");
    if (!(alpha > 0.0)) throw ConfigError("extractor: alpha must be positive");
    if (max_backtracks < 0) throw ConfigError("extractor: backtrack budget must be non-negative");
    if (!(support_floor >= 0.0 && support_floor < 1.0)) throw ConfigError("extractor: support floor must lie in [0, 1)");
  }
};

struct SensingBatch {
  ComplexMat probes;  // D x L
  RealVec samples;    // L
  double mu = 0.0;

  SensingBatch() = default;
  SensingBatch(ComplexMat a, RealVec s) : probes(std::move(a)), samples(std::move(s)) {
    if (probes.cols() != samples.size()) throw ShapeError("sensing batch: probe/sample count mismatch");
    if (samples.size() < 1) throw ShapeError("sensing batch: need at least one sample");
    mu = samples.mean();
  }

  int dimension() const { return static_cast<int>(probes.rows()); }
  int size() const { return static_cast<int>(samples.size()); }
};

inline double kappa(int dimension, int samples) {
  const double d = dimension;
  return std::log(d * samples) / (d * d);
}

inline double support_gamma(int dimension, int samples) {
  const double d = dimension;
  return std::sqrt(std::log(d * samples) / d);
}

namespace detail {

inline void check_dims(const SensingBatch& batch, const ComplexVec& phi) {
  if (phi.size() != batch.dimension()) throw ShapeError("extractor: fingerprint dimension mismatch");
}

// zeta = A^H phi, skipping zero coordinates of phi.
inline ComplexVec project(const SensingBatch& batch, const ComplexVec& phi) {
  std::vector<Eigen::Index> nz;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    if (phi(i) != cplx{0.0, 0.0}) nz.push_back(i);
  }
  if (nz.size() * 4 > static_cast<std::size_t>(phi.size())) return batch.probes.adjoint() * phi;
  ComplexVec zeta = ComplexVec::Zero(batch.size());
  for (Eigen::Index i : nz) zeta += batch.probes.row(i).adjoint() * phi(i);
  return zeta;
}

inline RealVec residuals(const SensingBatch& batch, const ComplexVec& phi, const ComplexVec& zeta) {
  const double offset = batch.mu - phi.squaredNorm();
  return batch.samples.array() - zeta.array().abs2() - offset;
}

}  // namespace detail

inline double loss(const SensingBatch& batch, const ComplexVec& phi) {
  detail::check_dims(batch, phi);
  const ComplexVec zeta = detail::project(batch, phi);
  return detail::residuals(batch, phi, zeta).squaredNorm() / batch.size();
}

/// Gradient with respect to the real coordinates (Re phi, Im phi), packed as
/// a complex vector: g_j = dL/dRe(phi_j) + i dL/dIm(phi_j).
inline ComplexVec gradient(const SensingBatch& batch, const ComplexVec& phi,
                           GradientMode mode = GradientMode::Analytic) {
  detail::check_dims(batch, phi);
  const ComplexVec zeta = detail::project(batch, phi);
  if (mode == GradientMode::Analytic) {
    const RealVec r = detail::residuals(batch, phi, zeta);
    const ComplexVec weighted = r.cast<cplx>().cwiseProduct(zeta);
    return (4.0 / batch.size()) * (r.sum() * phi - batch.probes * weighted);
  }
  const double offset = batch.mu - phi.squaredNorm();
  const ComplexVec coef = (batch.samples.cast<cplx>().array() - zeta.array() - offset).matrix();
  return coef.sum() * phi - batch.probes * coef.cwiseProduct(zeta);
}

/// Adaptive threshold alpha * sqrt(kappa * sum_l r_l^2 |zeta_l|^2).
inline double threshold_value(const SensingBatch& batch, const ComplexVec& phi, double alpha) {
  detail::check_dims(batch, phi);
  const ComplexVec zeta = detail::project(batch, phi);
  const RealVec r = detail::residuals(batch, phi, zeta);
  const double acc = (r.array().square() * zeta.array().abs2()).sum();
  return alpha * std::sqrt(kappa(batch.dimension(), batch.size()) * acc);
}

inline ComplexVec hard_threshold(const ComplexVec& z, double delta) {
  if (delta < 0.0) throw ParameterError("hard_threshold: negative threshold");
  ComplexVec out = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (std::abs(z(i)) < delta) out(i) = 0.0;
  }
  return out;
}

/// (1/L) sum_l s_l (|a_il|^2 - 1) for every coordinate i.
inline RealVec support_statistic(const SensingBatch& batch) {
  const Eigen::MatrixXd centered = (batch.probes.cwiseAbs2().array() - 1.0).matrix();
  return centered * batch.samples / batch.size();
}

/// Coordinates whose diagonal statistic exceeds gamma in magnitude.
inline std::vector<int> select_support(const SensingBatch& batch) {
  const RealVec stat = support_statistic(batch);
  const double gamma = support_gamma(batch.dimension(), batch.size());
  std::vector<int> out;
  for (int i = 0; i < stat.size(); ++i) {
    if (std::abs(stat(i)) > gamma) out.push_back(i);
  }
  return out;
}

struct SpectralInit {
  ComplexVec phi;    // initial estimate, supported on the selected coordinates
  ComplexVec v;      // unit leading eigenvector, embedded in D dimensions
  double psi = 0.0;
  bool fallback = false;  // Z vanished; v fell back to a coordinate vector
};

inline SpectralInit spectral_init(const SensingBatch& batch, const std::vector<int>& support) {
  if (support.empty()) throw InitializationError("spectral_init: empty support");
  const int k = static_cast<int>(support.size());
  const int d = batch.dimension();
  for (int i : support) {
    if (i < 0 || i >= d) throw ShapeError("spectral_init: support index out of range");
  }
  ComplexMat sub(k, batch.size());
  for (int r = 0; r < k; ++r) sub.row(r) = batch.probes.row(support[static_cast<std::size_t>(r)]);
  const RealVec weight = (batch.samples.array() - batch.mu) / batch.size();
  const ComplexMat z = sub * weight.cast<cplx>().asDiagonal() * sub.adjoint();

  SpectralInit out;
  out.v = ComplexVec::Zero(d);
  const double scale = batch.samples.cwiseAbs().maxCoeff() + 1.0;
  if (z.norm() <= 1e-13 * scale) {
    // Centered samples vanish: take the coordinate with the largest diagonal statistic.
    const RealVec stat = support_statistic(batch);
    int best = support.front();
    for (int i : support) {
      if (std::abs(stat(i)) > std::abs(stat(best))) best = i;
    }
    out.v(best) = 1.0;
    out.fallback = true;
  } else {
    Eigen::SelfAdjointEigenSolver<ComplexMat> eig(z);
    if (eig.info() != Eigen::Success) {
      throw InitializationError("spectral_init: eigen-decomposition failed on a " + std::to_string(k) + "x" +
                                std::to_string(k) + " submatrix (norm " + std::to_string(z.norm()) + ")");
    }
    Eigen::Index idx = 0;
    eig.eigenvalues().cwiseAbs().maxCoeff(&idx);
    const ComplexVec v_sub = eig.eigenvectors().col(idx).normalized();
    for (int r = 0; r < k; ++r) out.v(support[static_cast<std::size_t>(r)]) = v_sub(r);
  }
  const ComplexVec proj = detail::project(batch, out.v);
  out.psi = batch.samples.dot(proj.cwiseAbs2()) / batch.size() - batch.mu;
  out.phi = out.v * std::sqrt(std::abs(out.psi) / 2.0);
  return out;
}

struct ExtractionDiagnostics {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  std::vector<int> initial_support;
  bool support_fallback = false;  // no coordinate passed gamma
  bool init_fallback = false;     // spectral matrix vanished
};

struct SparsityFingerprint {
  int subframe = 0;
  ComplexVec phi;
  std::vector<int> support;
  ExtractionDiagnostics diagnostics;

  static std::vector<int> support_of(const ComplexVec& v) {
    std::vector<int> s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v(i) != cplx{0.0, 0.0}) s.push_back(static_cast<int>(i));
    }
    return s;
  }
};

inline SparsityFingerprint extract(const SensingBatch& batch, const ExtractorConfig& cfg, int subframe = 0) {
  cfg.validate();
  SparsityFingerprint fp;
  fp.subframe = subframe;
  auto& diag = fp.diagnostics;

  std::vector<int> support = select_support(batch);
  if (support.empty()) {
    const RealVec stat = support_statistic(batch);
    Eigen::Index best = 0;
    stat.cwiseAbs().maxCoeff(&best);
    support.push_back(static_cast<int>(best));
    diag.support_fallback = true;
  }
  diag.initial_support = support;
  const SpectralInit init = spectral_init(batch, support);
  diag.init_fallback = init.fallback;

  ComplexVec phi = init.phi;
  double current = loss(batch, phi);
  diag.initial_loss = current;
  const double beta = cfg.step_scale / (batch.mu > 0.0 ? batch.mu : 1.0);

  for (int n = 0; n < cfg.iterations; ++n) {
    const double phi_norm = phi.norm();
    if (phi_norm == 0.0) break;
    const ComplexVec g = gradient(batch, phi, cfg.gradient);
    const double delta = threshold_value(batch, phi, cfg.alpha);
    double step = beta;
    bool accepted = false;
    ComplexVec candidate;
    double candidate_loss = current;
    for (int b = 0; b <= cfg.max_backtracks; ++b) {
      candidate = hard_threshold(phi - step * g, step * delta);
      // A step that thresholds every coordinate away is never accepted.
      if (candidate.squaredNorm() == 0.0) {
        step *= 0.5;
        continue;
      }
      candidate_loss = loss(batch, candidate);
      if (candidate_loss <= current) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (candidate_loss > cfg.divergence_factor * std::max(diag.initial_loss, 1e-300)) {
        throw ExtractionError("extract: loss diverged to " + std::to_string(candidate_loss) + " from " +
                              std::to_string(diag.initial_loss) + " at iteration " + std::to_string(n));
      }
      break;  // no descent step available
    }
    const double change = (candidate - phi).norm() / phi_norm;
    phi = std::move(candidate);
    current = candidate_loss;
    diag.iterations = n + 1;
    if (change < cfg.tolerance) break;
  }
  // The threshold shrinks with the residuals, so an exact fit can leave
  // round-off sized coordinates behind.
  if (cfg.support_floor > 0.0 && phi.size() > 0) {
    const double floor = cfg.support_floor * phi.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      if (std::abs(phi(i)) < floor) phi(i) = 0.0;
    }
  }
  diag.final_loss = current;
  fp.phi = std::move(phi);
  fp.support = SparsityFingerprint::support_of(fp.phi);
  return fp;
}

// ---------------------------------------------------------------------------
// Sensing front end: beamspace images of the LS estimates, probe generation
// and probe-combined energy samples.

/// Per-tap unitary DFT across the antenna axis. Input is antenna-major
/// (m * tau + t); output is tap-major beamspace (t * M + k).
inline ComplexVec to_beamspace(const Eigen::Ref<const ComplexVec>& stacked, int taps, int antennas) {
  if (stacked.size() != static_cast<Eigen::Index>(taps) * antennas) {
    throw ShapeError("to_beamspace: dimension mismatch");
  }
  Eigen::FFT<double> fft;
  ComplexVec out(stacked.size());
  ComplexVec row(antennas), spec(antennas);
  const double scale = 1.0 / std::sqrt(static_cast<double>(antennas));
  for (int t = 0; t < taps; ++t) {
    for (int m = 0; m < antennas; ++m) row(m) = stacked(m * taps + t);
    fft.fwd(spec, row);
    out.segment(static_cast<Eigen::Index>(t) * antennas, antennas) = spec * scale;
  }
  return out;
}

inline ComplexMat beamspace_samples(const StackedEstimate& est) {
  ComplexMat out(est.dimension(), est.sample_count());
  for (int l = 0; l < est.sample_count(); ++l) out.col(l) = to_beamspace(est.samples.col(l), est.taps, est.antennas);
  return out;
}

inline ComplexMat gaussian_probes(int dimension, int samples, std::uint64_t seed) {
  Rng rng(seed);
  ComplexMat a(dimension, samples);
  rng.fill_complex_normal(a, 1.0);
  return a;
}

/// Beamspace images of clustered channels toward uniformly random azimuths,
/// each scaled to squared norm D.
inline ComplexMat clustered_probes(const ArraySpec& array, const ClusterTable& table, const TapGrid& grid,
                                   int samples, std::uint64_t seed) {
  Rng rng(seed);
  const int d = array.antennas * grid.taps;
  ComplexMat a(d, samples);
  for (int l = 0; l < samples; ++l) {
    const double az = rng.uniform(0.0, 360.0);
    const auto ch = draw_channel_at(array, table, grid, az, SourceId::user(0), derive_seed(seed, l));
    ComplexVec b = to_beamspace(stack_taps(ch.taps), grid.taps, array.antennas);
    const double nrm = b.norm();
    a.col(l) = nrm > 0.0 ? ComplexVec(b * (std::sqrt(static_cast<double>(d)) / nrm)) : b;
  }
  return a;
}

/// s_I(l) = |a_l^H x_l|^2 for beamspace estimates x_l.
inline RealVec probe_samples(const ComplexMat& probes, const ComplexMat& beamspace) {
  if (probes.rows() != beamspace.rows() || probes.cols() != beamspace.cols()) {
    throw ShapeError("probe_samples: probe and estimate shapes differ");
  }
  return probes.cwiseProduct(beamspace.conjugate()).colwise().sum().cwiseAbs2().transpose();
}

/// Batch for one subframe. With `normalize`, samples are divided by their mean
/// so mu = 1; fingerprints then differ from the unnormalized ones by a
/// positive scale only.
inline SensingBatch make_sensing_batch(const StackedEstimate& est, ComplexMat probes, bool normalize = true) {
  const ComplexMat x = beamspace_samples(est);
  RealVec s = probe_samples(probes, x);
  if (normalize) {
    const double m = s.mean();
    if (m > 0.0) s /= m;
  }
  return SensingBatch(std::move(probes), std::move(s));
}

}  // namespace dmrs
