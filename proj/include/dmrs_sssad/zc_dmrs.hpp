#pragma once

// Zadoff-Chu DMRS generation and cyclic-shift preamble pools.

#include "dmrs_sssad/common.hpp"

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace dmrs {

struct ZcSequence {
  int length = 0;
  int root = 0;
  ComplexVec samples;  // unit-norm, every element of magnitude 1/sqrt(length)
};

/// Root-r Zadoff-Chu sequence of length n, element j (1-based) equal to
/// exp(-i*pi*r*j*(j+1)/n) / sqrt(n). Stored with j = 1 at index 0.
inline ZcSequence generate_zc(int n, int r) {
  if (n < 2) throw ParameterError("generate_zc: length must be >= 2, got " + std::to_string(n));
  if (r < 1 || r > n - 1) {
    throw ParameterError("generate_zc: root " + std::to_string(r) + " outside 1.." +
                         std::to_string(n - 1));
  }
  ZcSequence zc{n, r, ComplexVec(n)};
  const double amp = 1.0 / std::sqrt(static_cast<double>(n));
  const std::int64_t period = 2 * static_cast<std::int64_t>(n);
  for (int j = 1; j <= n; ++j) {
    // Reduce r*j*(j+1) modulo 2n in integers so the phase stays exact for long sequences.
    const std::int64_t jj = static_cast<std::int64_t>(j) * (j + 1) % period;
    const std::int64_t m = (static_cast<std::int64_t>(r) % period) * jj % period;
    const double phase = -kPi * static_cast<double>(m) / static_cast<double>(n);
    zc.samples(j - 1) = std::polar(amp, phase);
  }
  return zc;
}

/// output[j] = input[(j + shift) mod n]; any integer shift is accepted.
inline ComplexVec cyclic_shift(const ComplexVec& seq, Eigen::Index shift) {
  const Eigen::Index n = seq.size();
  ComplexVec out(n);
  if (n == 0) return out;
  const Eigen::Index s = ((shift % n) + n) % n;
  for (Eigen::Index j = 0; j < n; ++j) out(j) = seq((j + s) % n);
  return out;
}

struct PreambleEntry {
  int root = 0;
  int shift = 0;  // samples
  ComplexVec samples;
};

struct PreamblePool {
  int sequence_length = 0;
  int shift_size = 0;
  std::vector<PreambleEntry> entries;
  std::vector<int> assignment;  // user index (0-based) -> pool index

  std::size_t size() const { return entries.size(); }
  const ComplexVec& sequence_for_user(int user) const {
    return entries.at(static_cast<std::size_t>(assignment.at(static_cast<std::size_t>(user))))
        .samples;
  }
};

/// Build a pool of q sequences. Allocation is deterministic: the first shift of
/// every root is used before any root is shifted again.
inline PreamblePool build_pool(const std::vector<ZcSequence>& base, int shift_size, int q) {
  if (base.empty()) throw ParameterError("build_pool: no base sequences");
  if (shift_size < 1) throw ParameterError("build_pool: shift_size must be positive");
  if (q < 0) throw ParameterError("build_pool: negative pool size");
  const int n = base.front().length;
  for (const auto& z : base) {
    if (z.length != n) throw ParameterError("build_pool: base sequences differ in length");
  }
  const int shifts_per_root = n / shift_size;
  const long capacity = static_cast<long>(shifts_per_root) * static_cast<long>(base.size());
  if (q > capacity) {
    throw CapacityError("build_pool: requested " + std::to_string(q) + " preambles but only " +
                        std::to_string(capacity) + " fit (" + std::to_string(base.size()) +
                        " roots x " + std::to_string(shifts_per_root) + " shifts)");
  }
  PreamblePool pool;
  pool.sequence_length = n;
  pool.shift_size = shift_size;
  pool.entries.reserve(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) {
    const auto& root = base[static_cast<std::size_t>(i) % base.size()];
    const int shift = (i / static_cast<int>(base.size())) * shift_size;
    pool.entries.push_back({root.root, shift, cyclic_shift(root.samples, shift)});
  }
  return pool;
}

/// Give user k pool entry k. Throws when the pool cannot cover every user.
inline void assign_users(PreamblePool& pool, int users) {
  if (users < 0 || static_cast<std::size_t>(users) > pool.size()) {
    throw CapacityError("assign_users: pool of " + std::to_string(pool.size()) +
                        " cannot serve " + std::to_string(users) + " users");
  }
  pool.assignment.resize(static_cast<std::size_t>(users));
  std::iota(pool.assignment.begin(), pool.assignment.end(), 0);
}

/// Shifts must clear the channel delay spread or LS estimates of different
/// users overlap.
inline void require_shift_clears_delay_spread(const PreamblePool& pool, int taps) {
  if (pool.shift_size <= taps) {
    throw ParameterError("preamble shift size " + std::to_string(pool.shift_size) +
                         " must exceed delay-spread length " + std::to_string(taps));
  }
}

/// Periodic correlation sum_j a(j) * conj(b((j + lag) mod n)).
inline cplx periodic_correlation(const ComplexVec& a, const ComplexVec& b, Eigen::Index lag) {
  if (a.size() != b.size()) throw ShapeError("periodic_correlation: length mismatch");
  const Eigen::Index n = a.size();
  const Eigen::Index s = ((lag % n) + n) % n;
  cplx acc{0.0, 0.0};
  for (Eigen::Index j = 0; j < n; ++j) acc += a(j) * std::conj(b((j + s) % n));
  return acc;
}

}  // namespace dmrs
