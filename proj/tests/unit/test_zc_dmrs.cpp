#include "dmrs_sssad/zc_dmrs.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

using namespace dmrs;

namespace {

// Direct evaluation in long double without any phase reduction.
std::complex<long double> zc_oracle(int n, int r, int j) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double phase = -pi * r * j * (j + 1) / static_cast<long double>(n);
  return std::polar(1.0L / std::sqrt(static_cast<long double>(n)), phase);
}

// Brute-force periodic correlation, written independently of the library.
std::complex<double> corr(const ComplexVec& a, const ComplexVec& b, int lag) {
  const int n = static_cast<int>(a.size());
  std::complex<double> acc = 0.0;
  for (int j = 0; j < n; ++j) acc += a(j) * std::conj(b((j + lag) % n));
  return acc;
}

}  // namespace

TEST(GenerateZc, MatchesDirectFormula) {
  for (int n : {5, 7, 13, 139}) {
    for (int r : {1, 2, n - 1}) {
      const auto z = generate_zc(n, r);
      ASSERT_EQ(z.samples.size(), n);
      for (int j = 1; j <= n; ++j) {
        const auto want = zc_oracle(n, r, j);
        EXPECT_NEAR(z.samples(j - 1).real(), static_cast<double>(want.real()), 1e-12);
        EXPECT_NEAR(z.samples(j - 1).imag(), static_cast<double>(want.imag()), 1e-12);
      }
    }
  }
}

TEST(GenerateZc, LastElementOfLengthFiveIsReal) {
  const auto z = generate_zc(5, 1);
  EXPECT_NEAR(z.samples(4).real(), 1.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(z.samples(4).imag(), 0.0, 1e-15);
}

TEST(GenerateZc, ConstantAmplitudeAndUnitNorm) {
  for (int n : {2, 5, 12, 139, 1021}) {
    for (int r = 1; r < n; r += std::max(1, n / 7)) {
      const auto z = generate_zc(n, r);
      for (Eigen::Index j = 0; j < z.samples.size(); ++j) {
        EXPECT_NEAR(std::abs(z.samples(j)), 1.0 / std::sqrt(static_cast<double>(n)), 1e-12);
      }
      EXPECT_NEAR(z.samples.norm(), 1.0, 1e-12);
    }
  }
}

TEST(GenerateZc, ZeroPeriodicAutocorrelationForPrimeLengths) {
  for (int n : {5, 7, 13}) {
    for (int r = 1; r < n; ++r) {
      const auto z = generate_zc(n, r);
      EXPECT_NEAR(std::abs(corr(z.samples, z.samples, 0)), 1.0, 1e-12);
      for (int s = 1; s < n; ++s) EXPECT_LT(std::abs(corr(z.samples, z.samples, s)), 1e-9) << n << " " << r << " " << s;
    }
  }
}

TEST(GenerateZc, CrossRootCorrelationIsFlat) {
  for (int n : {5, 7, 13}) {
    for (int r1 = 1; r1 < n; ++r1) {
      for (int r2 = r1 + 1; r2 < n; ++r2) {
        const auto a = generate_zc(n, r1);
        const auto b = generate_zc(n, r2);
        for (int s = 0; s < n; ++s) {
          EXPECT_NEAR(std::abs(corr(a.samples, b.samples, s)), 1.0 / std::sqrt(static_cast<double>(n)), 1e-9);
        }
      }
    }
  }
}

TEST(GenerateZc, LibraryCorrelationAgreesWithBruteForce) {
  const auto a = generate_zc(13, 3);
  const auto b = generate_zc(13, 5);
  for (int s = -13; s < 26; ++s) {
    const auto want = corr(a.samples, b.samples, ((s % 13) + 13) % 13);
    EXPECT_NEAR(std::abs(periodic_correlation(a.samples, b.samples, s) - want), 0.0, 1e-14);
  }
}

TEST(GenerateZc, RejectsBadArguments) {
  EXPECT_THROW(generate_zc(1, 1), ParameterError);
  EXPECT_THROW(generate_zc(7, 0), ParameterError);
  EXPECT_THROW(generate_zc(7, 7), ParameterError);
  EXPECT_THROW(generate_zc(7, -2), ParameterError);
}

TEST(CyclicShift, RotatesLeft) {
  ComplexVec v(3);
  v << 1.0, 2.0, 3.0;
  EXPECT_EQ(cyclic_shift(v, 0), v);
  ComplexVec one(3);
  one << 2.0, 3.0, 1.0;
  EXPECT_EQ(cyclic_shift(v, 1), one);
  EXPECT_EQ(cyclic_shift(v, 3), v);
  EXPECT_EQ(cyclic_shift(v, -2), one);
  EXPECT_EQ(cyclic_shift(v, 7), one);
}

TEST(CyclicShift, PreservesEnergy) {
  const auto z = generate_zc(139, 17);
  for (int s : {0, 1, 8, 138}) EXPECT_NEAR(cyclic_shift(z.samples, s).norm(), 1.0, 1e-12);
}

TEST(BuildPool, ArithmeticShifts) {
  const auto pool = build_pool({generate_zc(12, 1)}, 4, 3);
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool.entries[0].shift, 0);
  EXPECT_EQ(pool.entries[1].shift, 4);
  EXPECT_EQ(pool.entries[2].shift, 8);
  EXPECT_EQ(pool.entries[2].samples, cyclic_shift(generate_zc(12, 1).samples, 8));
}

TEST(BuildPool, CapacityError) {
  EXPECT_THROW(build_pool({generate_zc(12, 1)}, 5, 3), CapacityError);
  EXPECT_NO_THROW(build_pool({generate_zc(12, 1)}, 5, 2));
}

TEST(BuildPool, OneSequencePerRootWhenShiftFillsLength) {
  const auto pool = build_pool({generate_zc(13, 1), generate_zc(13, 2)}, 13, 2);
  ASSERT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.entries[0].root, 1);
  EXPECT_EQ(pool.entries[1].root, 2);
  EXPECT_EQ(pool.entries[0].shift, 0);
  EXPECT_EQ(pool.entries[1].shift, 0);
}

TEST(BuildPool, RootsBeforeShifts) {
  const auto pool = build_pool({generate_zc(13, 1), generate_zc(13, 2), generate_zc(13, 3)}, 4, 7);
  const int roots[] = {1, 2, 3, 1, 2, 3, 1};
  const int shifts[] = {0, 0, 0, 4, 4, 4, 8};
  for (int i = 0; i < 7; ++i) {
    EXPECT_EQ(pool.entries[static_cast<std::size_t>(i)].root, roots[i]);
    EXPECT_EQ(pool.entries[static_cast<std::size_t>(i)].shift, shifts[i]);
  }
}

TEST(BuildPool, SameRootEntriesOrthogonalOverDelaySpread) {
  // Shift 8 > tau = 4: correlation between two entries vanishes on the first tau lags.
  const auto pool = build_pool({generate_zc(31, 1)}, 8, 3);
  for (std::size_t a = 0; a < pool.size(); ++a) {
    for (std::size_t b = 0; b < pool.size(); ++b) {
      if (a == b) continue;
      for (int lag = 0; lag < 4; ++lag) {
        EXPECT_LT(std::abs(corr(pool.entries[a].samples, pool.entries[b].samples, lag)), 1e-9);
      }
    }
  }
}

TEST(BuildPool, RejectsInconsistentInput) {
  EXPECT_THROW(build_pool({}, 4, 1), ParameterError);
  EXPECT_THROW(build_pool({generate_zc(12, 1)}, 0, 1), ParameterError);
  EXPECT_THROW(build_pool({generate_zc(12, 1), generate_zc(13, 1)}, 4, 1), ParameterError);
}

TEST(AssignUsers, IdentityAssignmentAndCapacity) {
  auto pool = build_pool({generate_zc(139, 1)}, 8, 16);
  assign_users(pool, 16);
  for (int k = 0; k < 16; ++k) EXPECT_EQ(pool.sequence_for_user(k), pool.entries[static_cast<std::size_t>(k)].samples);
  EXPECT_THROW(assign_users(pool, 17), CapacityError);
}

TEST(AssignUsers, ShiftMustExceedDelaySpread) {
  const auto pool = build_pool({generate_zc(139, 1)}, 4, 4);
  EXPECT_THROW(require_shift_clears_delay_spread(pool, 4), ParameterError);
  EXPECT_NO_THROW(require_shift_clears_delay_spread(pool, 3));
}
