#pragma once

// Shared vocabulary for the DMRS spoofing simulator: linear-algebra aliases,
// error types and seeded random streams.

#include <Eigen/Dense>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace dmrs {

using cplx = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

// Error hierarchy. Everything thrown by the library derives from Error so the
// CLI can map failures onto exit codes in one place.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct TableError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DegenerateInputError : Error {
  using Error::Error;
};
struct InitializationError : Error {
  using Error::Error;
};
struct ExtractionError : Error {
  using Error::Error;
};
struct InsufficientDataError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// SplitMix64 finalizer; used for counter-based sub-seeding so that every
// (trial, subframe, purpose) triple owns an independent stream.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a) noexcept {
  return mix64(base ^ mix64(a + 0x632be59bd9b4e019ULL));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, Rest... rest) noexcept {
  return derive_seed(derive_seed(base, a), static_cast<std::uint64_t>(rest)...);
}

// Seeded source of real and circularly-symmetric complex Gaussian draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  // CN(0, variance): real and imaginary parts each carry variance/2.
  cplx complex_normal(double variance = 1.0) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {s * re, s * im};
  }

  void fill_complex_normal(Eigen::Ref<ComplexMat> out, double variance) {
    const double s = std::sqrt(variance / 2.0);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        out(i, j) = cplx{s * re, s * im};
      }
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

}  // namespace dmrs
